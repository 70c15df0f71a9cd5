#pragma once

// Rank correlations and report emission.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "shift/baseline_scores.hpp"
#include "shift/csv.hpp"
#include "shift/error.hpp"
#include "shift/pool_io.hpp"
#include "shift/rirs.hpp"
#include "shift/select.hpp"

namespace shift {

struct PairedSeries {
  std::vector<std::string> labels;
  std::vector<double> xs;
  std::vector<double> ys;
};

namespace detail {

inline void check_series(const PairedSeries& s) {
  if (s.xs.size() != s.ys.size() || (!s.labels.empty() && s.labels.size() != s.xs.size())) {
    fail(ErrorCode::kShapeMismatch, "paired series lengths differ");
  }
  if (s.xs.size() < 2) fail(ErrorCode::kDegenerateSeries, "need at least 2 pairs");
  for (std::size_t i = 0; i < s.xs.size(); ++i) {
    if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) {
      fail(ErrorCode::kNonFiniteValue, "non-finite value at pair " + std::to_string(i));
    }
  }
}

// Merge sort of v that returns the number of pairs i < j with v[i] > v[j].
inline std::uint64_t count_inversions(std::vector<double>& v) {
  std::vector<double> buf(v.size());
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size());
      const std::size_t hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[i] <= v[j]) {
          buf[k++] = v[i++];
        } else {
          inversions += mid - i;
          buf[k++] = v[j++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return inversions;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted sequence.
template <typename Eq>
std::uint64_t tied_pairs(std::size_t n, Eq&& equal) {
  std::uint64_t ties = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      ties += static_cast<std::uint64_t>(run) * (run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

}  // namespace detail

// 1-based fractional ranks; tied values share the mean of their positions.
inline std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    fail(ErrorCode::kDegenerateSeries, "zero variance in a correlated series");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Pearson correlation of average ranks.
inline double spearman_rho(const PairedSeries& s) {
  detail::check_series(s);
  const auto rx = fractional_ranks(s.xs);
  const auto ry = fractional_ranks(s.ys);
  return pearson(rx, ry);
}

// Kendall's tau-b (equals tau-a without ties), O(n log n).
inline double kendall_tau(const PairedSeries& s) {
  detail::check_series(s);
  const std::size_t n = s.xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s.xs[a] < s.xs[b] || (s.xs[a] == s.xs[b] && s.ys[a] < s.ys[b]);
  });
  const auto x_ties = detail::tied_pairs(
      n, [&](std::size_t a, std::size_t b) { return s.xs[order[a]] == s.xs[order[b]]; });
  const auto joint_ties = detail::tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return s.xs[order[a]] == s.xs[order[b]] && s.ys[order[a]] == s.ys[order[b]];
  });
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = s.ys[order[i]];
  const auto discordant = detail::count_inversions(ys);  // leaves ys sorted
  const auto y_ties =
      detail::tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });

  const auto total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (x_ties == total || y_ties == total) {
    fail(ErrorCode::kDegenerateSeries, "one series is constant");
  }
  const double numerator = static_cast<double>(total) - static_cast<double>(x_ties) -
                           static_cast<double>(y_ties) + static_cast<double>(joint_ties) -
                           2.0 * static_cast<double>(discordant);
  const double denom = std::sqrt(static_cast<double>(total - x_ties) *
                                 static_cast<double>(total - y_ties));
  return std::clamp(numerator / denom, -1.0, 1.0);
}

// Top-5 / bottom-5 instances by pre-RL shift magnitude and their measured
// single-instance Pass@1 gains. xs encodes the shift order (higher = larger
// shift), ys the raw gain in percentage points.
inline PairedSeries shift_gain_fixture() {
  PairedSeries s;
  const double gains[] = {17.67, 13.91, 12.58, 15.58, 14.00, 7.50, 11.08, 12.00, 9.58, 2.25};
  for (int rank = 1; rank <= 10; ++rank) {
    s.labels.push_back("rank_" + std::to_string(rank));
    s.xs.push_back(static_cast<double>(11 - rank));
    s.ys.push_back(gains[rank - 1]);
  }
  return s;
}

struct CorrelationRow {
  std::string pair;
  std::size_t n = 0;
  double spearman = 0.0;
  double kendall = 0.0;
};

inline CorrelationRow correlate(std::string pair, const PairedSeries& s) {
  return {std::move(pair), s.xs.size(), spearman_rho(s), kendall_tau(s)};
}

// Spearman/Kendall of question and response token lengths against q.
inline std::vector<CorrelationRow> length_correlation(std::span<const RirsFeatures> features,
                                                      std::span<const RolloutRecord> records) {
  std::unordered_map<std::string, const RolloutRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.instance_id, &r);
  PairedSeries question, response;
  for (const auto& f : features) {
    const auto it = by_id.find(f.instance_id);
    if (it == by_id.end()) {
      fail(ErrorCode::kJoinMismatch, "no rollout record for instance '" + f.instance_id + "'");
    }
    const auto& r = *it->second;
    if (!r.question_token_len || !r.response_token_len) {
      fail(ErrorCode::kJoinMismatch,
           "rollout record '" + f.instance_id + "' lacks token lengths");
    }
    for (auto* s : {&question, &response}) {
      s->labels.push_back(f.instance_id);
      s->ys.push_back(f.q);
    }
    question.xs.push_back(static_cast<double>(*r.question_token_len));
    response.xs.push_back(static_cast<double>(*r.response_token_len));
  }
  if (features.size() < 2) {
    fail(ErrorCode::kDegenerateSeries, "need at least 2 joined instances");
  }
  return {correlate("question_token_len_vs_q", question),
          correlate("response_token_len_vs_q", response)};
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json correlations_to_json(std::span<const CorrelationRow> rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"pair", r.pair}, {"n", r.n}, {"spearman", r.spearman}, {"kendall", r.kendall}});
  }
  return out;
}

inline std::string features_csv(std::span<const RirsFeatures> features) {
  std::string out = "instance_id,q,q_tilde\n";
  for (const auto& f : features) {
    out += csv_field(f.instance_id) + "," + csv_number(f.q) + "," + csv_number(f.q_tilde) + "\n";
  }
  return out;
}

// One row per pick: instance_id,q,q_tilde,pick_step,coverage_distance,combined_score.
// q and q_tilde are looked up in `features` and left blank when absent.
inline std::string trace_csv(std::span<const SelectionResult> selections,
                             std::span<const RirsFeatures> features) {
  std::unordered_map<std::string, const RirsFeatures*> by_id;
  for (const auto& f : features) by_id.emplace(f.instance_id, &f);
  std::string out = "instance_id,q,q_tilde,pick_step,coverage_distance,combined_score\n";
  for (const auto& sel : selections) {
    for (const auto& s : sel.steps) {
      const auto it = by_id.find(s.instance_id);
      const RirsFeatures* f = it == by_id.end() ? nullptr : it->second;
      out += csv_field(s.instance_id) + "," +
             csv_number(f ? std::optional<double>(f->q) : std::nullopt) + "," +
             csv_number(f ? std::optional<double>(f->q_tilde) : std::nullopt) + "," +
             std::to_string(s.pick) + "," + csv_number(s.coverage_distance) + "," +
             csv_number(s.score) + "\n";
    }
  }
  return out;
}

struct Report {
  std::vector<RirsFeatures> features;
  std::vector<SelectionResult> selections;
  std::vector<ScoreTable> scores;
  std::vector<CorrelationRow> correlations;
};

// Writes features.csv, trace.csv, correlations.json, summary.json and one
// scores_<name>.csv per score table into `dir`. Returns the written paths.
inline std::vector<std::filesystem::path> emit_report(const Report& report,
                                                      const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    detail::write_file_bytes(dir / name, text);
    written.push_back(dir / name);
  };
  put("features.csv", features_csv(report.features));
  put("trace.csv", trace_csv(report.selections, report.features));
  put("correlations.json", correlations_to_json(report.correlations).dump(2) + "\n");
  for (const auto& t : report.scores) put("scores_" + t.score_name + ".csv", score_table_csv(t));

  nlohmann::json summary;
  summary["instances"] = report.features.size();
  auto sels = nlohmann::json::array();
  for (const auto& s : report.selections) sels.push_back(selection_to_json(s));
  summary["selections"] = std::move(sels);
  auto scores = nlohmann::json::array();
  for (const auto& t : report.scores) {
    scores.push_back({{"score_name", t.score_name},
                      {"direction", direction_name(t.direction)},
                      {"entries", t.entries.size()}});
  }
  summary["scores"] = std::move(scores);
  summary["correlations"] = correlations_to_json(report.correlations);
  put("summary.json", summary.dump(2) + "\n");
  return written;
}

}  // namespace shift
