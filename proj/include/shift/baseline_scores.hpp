#pragma once

// Rollout-based baseline scores: self-consistency entropy, CoT similarity,
// question/answer perplexity, and rank-and-take selection on any score.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shift/csv.hpp"
#include "shift/error.hpp"
#include "shift/matrix.hpp"
#include "shift/pool_io.hpp"
#include "shift/select.hpp"

namespace shift {

enum class Direction { kHigherFirst, kLowerFirst };

constexpr std::string_view direction_name(Direction d) {
  return d == Direction::kHigherFirst ? "higher_first" : "lower_first";
}

enum class ScoreKind { kScEntropy, kCotSimilarity, kQuestionPpl, kAnswerPpl };

constexpr std::string_view score_name(ScoreKind k) {
  switch (k) {
    case ScoreKind::kScEntropy: return "sc_entropy";
    case ScoreKind::kCotSimilarity: return "cot_similarity";
    case ScoreKind::kQuestionPpl: return "q_ppl";
    case ScoreKind::kAnswerPpl: return "a_ppl";
  }
  return "?";
}

constexpr Direction score_direction(ScoreKind k) {
  return k == ScoreKind::kCotSimilarity ? Direction::kLowerFirst
                                        : Direction::kHigherFirst;
}

inline ScoreKind parse_score(std::string_view name) {
  for (auto k : {ScoreKind::kScEntropy, ScoreKind::kCotSimilarity,
                 ScoreKind::kQuestionPpl, ScoreKind::kAnswerPpl}) {
    if (score_name(k) == name) return k;
  }
  fail(ErrorCode::kUnknownScore, "unknown score '" + std::string(name) + "'");
}

// Scores in pool order; ties in rank_and_take resolve to the earlier entry.
struct ScoreTable {
  std::string score_name;
  Direction direction = Direction::kHigherFirst;
  std::vector<std::pair<std::string, double>> entries;
};

// Shannon entropy (nats) of the exact-match answer distribution, evaluated
// as ln R - (1/R) sum c ln c so that all-distinct answers give ln R exactly.
inline double sc_entropy(std::span<const std::string> answers) {
  if (answers.empty()) fail(ErrorCode::kEmptyRollouts, "no answers to score");
  std::map<std::string_view, std::size_t> counts;
  for (const auto& a : answers) ++counts[a];
  if (counts.size() == 1) return 0.0;
  const double total = static_cast<double>(answers.size());
  double sum = 0.0;
  for (const auto& [answer, c] : counts) {
    const double cd = static_cast<double>(c);
    sum += cd * std::log(cd);
  }
  const double h = std::log(total) - sum / total;
  return h < 0.0 ? 0.0 : h;
}

// Mean cosine similarity over all unordered pairs of rows.
inline double cot_similarity(const Matrix<double>& embeddings) {
  const std::size_t r = embeddings.rows();
  if (r < 2) {
    fail(ErrorCode::kTooFewRollouts,
         "cot_similarity needs at least 2 rollouts, got " + std::to_string(r));
  }
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    norms[i] = std::sqrt(detail::squared_norm(embeddings.row(i)));
    if (!(norms[i] > 0.0)) {
      fail(ErrorCode::kZeroEmbedding, "rollout " + std::to_string(i) + " has a zero embedding");
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const auto a = embeddings.row(i);
    for (std::size_t j = i + 1; j < r; ++j) {
      const auto b = embeddings.row(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
      sum += std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
    }
  }
  return sum / (static_cast<double>(r) * static_cast<double>(r - 1) / 2.0);
}

// exp(-mean log-probability), natural log.
inline double perplexity(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) fail(ErrorCode::kEmptyTokens, "no tokens to score");
  double sum = 0.0;
  for (const double lp : token_logprobs) {
    if (lp > 0.0) {
      fail(ErrorCode::kPositiveLogprob, "log-probability " + std::to_string(lp) + " > 0");
    }
    sum += lp;
  }
  return std::exp(-sum / static_cast<double>(token_logprobs.size()));
}

inline double score_record(const RolloutRecord& r, ScoreKind kind) {
  try {
    switch (kind) {
      case ScoreKind::kScEntropy: return sc_entropy(r.answers);
      case ScoreKind::kCotSimilarity: return cot_similarity(r.cot_embeddings);
      case ScoreKind::kQuestionPpl: return perplexity(r.question_token_logprobs);
      case ScoreKind::kAnswerPpl: return perplexity(r.answer_token_logprobs);
    }
  } catch (const Error& e) {
    fail(e.code(), "instance '" + r.instance_id + "': " + e.what());
  }
  return 0.0;
}

inline ScoreTable score_table(std::span<const RolloutRecord> records, ScoreKind kind) {
  ScoreTable table;
  table.score_name = score_name(kind);
  table.direction = score_direction(kind);
  table.entries.reserve(records.size());
  for (const auto& r : records) table.entries.emplace_back(r.instance_id, score_record(r, kind));
  return table;
}

inline SelectionResult rank_and_take(const ScoreTable& table, std::size_t budget) {
  detail::check_budget(table.entries.size(), budget);
  for (const auto& [id, v] : table.entries) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteValue, "score for '" + id + "' is not finite");
  }
  std::vector<std::size_t> order(table.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool higher = table.direction == Direction::kHigherFirst;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double x = table.entries[a].second;
    const double y = table.entries[b].second;
    return higher ? x > y : x < y;
  });
  SelectionResult result;
  result.method = table.score_name;
  result.budget = budget;
  result.init_policy = std::string(direction_name(table.direction));
  for (std::size_t k = 0; k < budget; ++k) {
    SelectionStep s;
    s.pick = k + 1;
    s.pool_index = order[k];
    s.instance_id = table.entries[order[k]].first;
    s.score = table.entries[order[k]].second;
    result.steps.push_back(std::move(s));
  }
  detail::finish(result);
  return result;
}

// CSV: instance_id,score_name,score,direction
inline std::string score_table_csv(const ScoreTable& table) {
  std::string out = "instance_id,score_name,score,direction\n";
  for (const auto& [id, v] : table.entries) {
    out += csv_field(id) + "," + csv_field(table.score_name) + "," + csv_number(v) + "," +
           std::string(direction_name(table.direction)) + "\n";
  }
  return out;
}

inline void write_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  detail::write_file_bytes(path, score_table_csv(table));
}

}  // namespace shift
