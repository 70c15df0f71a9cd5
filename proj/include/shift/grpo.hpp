#pragma once

// Numeric kernels of the GRPO objective with verifiable rewards. No
// training loop: these evaluate the objective for given log-probabilities.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shift/error.hpp"

namespace shift::grpo {

inline constexpr double kDefaultEpsilon = 1e-6;

struct RewardGroup {
  std::vector<double> rewards;
  double epsilon = kDefaultEpsilon;
};

// Per-token inputs for one trajectory (or a concatenation of several).
struct TokenBatch {
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> advantages;
  std::vector<double> mask;
  std::vector<double> kl_terms;
};

struct GrpoParams {
  double clip_epsilon = 0.2;
  double beta = 0.0;
  double epsilon = kDefaultEpsilon;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

// 1 iff the trimmed answers match case-insensitively.
inline int verify_reward(std::string_view answer, std::string_view gold) {
  const auto a = detail::trim(answer);
  const auto g = detail::trim(gold);
  if (a.empty() || g.empty()) fail(ErrorCode::kEmptyAnswer, "answer or gold is empty");
  return detail::lower(a) == detail::lower(g) ? 1 : 0;
}

inline void validate(const RewardGroup& group) {
  if (group.rewards.empty()) fail(ErrorCode::kInvalidParams, "reward group is empty");
  if (!(group.epsilon > 0.0)) fail(ErrorCode::kInvalidParams, "epsilon must be > 0");
  for (const double r : group.rewards) {
    if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
      fail(ErrorCode::kInvalidParams, "reward " + std::to_string(r) + " outside [0, 1]");
    }
  }
}

// (r_i - mean) / (std + epsilon) with the population standard deviation.
inline std::vector<double> group_advantages(const RewardGroup& group) {
  validate(group);
  const auto& r = group.rewards;
  const double n = static_cast<double>(r.size());
  double mean = 0.0;
  for (const double v : r) mean += v;
  mean /= n;
  // Second-pass correction; makes r_i - mean exactly 0 for equal rewards.
  double residual = 0.0;
  for (const double v : r) residual += v - mean;
  mean += residual / n;
  double var = 0.0;
  for (const double v : r) var += (v - mean) * (v - mean);
  const double denom = std::sqrt(var / n) + group.epsilon;
  std::vector<double> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = (r[i] - mean) / denom;
  return out;
}

inline double clipped_surrogate(double ratio, double advantage, double clip_epsilon) {
  if (!(ratio > 0.0)) {
    fail(ErrorCode::kNonPositiveRatio, "importance ratio must be > 0, got " + std::to_string(ratio));
  }
  const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

// KL(p || ref) over an explicit vocabulary, natural log. Terms with p = 0
// contribute 0; ref = 0 where p > 0 is rejected.
inline double kl_divergence(std::span<const double> p, std::span<const double> ref) {
  if (p.size() != ref.size() || p.empty()) {
    fail(ErrorCode::kInvalidDistribution, "distribution sizes differ or are empty");
  }
  double sp = 0.0, sr = 0.0, kl = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (!(p[v] >= 0.0) || !(ref[v] >= 0.0)) {
      fail(ErrorCode::kInvalidDistribution, "negative probability");
    }
    sp += p[v];
    sr += ref[v];
    if (p[v] == 0.0) continue;
    if (ref[v] == 0.0) fail(ErrorCode::kInvalidDistribution, "reference has zero mass where p > 0");
    kl += p[v] * std::log(p[v] / ref[v]);
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sr - 1.0) > 1e-9) {
    fail(ErrorCode::kInvalidDistribution, "distribution does not sum to 1");
  }
  return std::max(kl, 0.0);
}

// sum(m_t * kl_t) / (sum(m_t) + epsilon)
inline double kl_penalty(const TokenBatch& batch, double epsilon) {
  if (batch.mask.size() != batch.kl_terms.size()) {
    fail(ErrorCode::kShapeMismatch, "mask and kl_terms lengths differ");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < batch.kl_terms.size(); ++t) {
    if (!(batch.kl_terms[t] >= 0.0)) {
      fail(ErrorCode::kNegativeKlTerm, "kl term " + std::to_string(t) + " is negative");
    }
    num += batch.mask[t] * batch.kl_terms[t];
    den += batch.mask[t];
  }
  return num / (den + epsilon);
}

struct Trajectory {
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> mask;      // empty means all ones
  std::vector<double> kl_terms;  // empty means zero KL
};

// One prompt: N rewards and the N sampled trajectories they score.
struct PromptGroup {
  RewardGroup rewards;
  std::vector<Trajectory> trajectories;
};

struct GroupTerms {
  std::vector<double> advantages;
  double surrogate = 0.0;  // (1/N) sum_i sum_t clipped surrogate
  double kl = 0.0;
  double objective = 0.0;  // surrogate - beta * kl
};

struct ObjectiveTerms {
  std::vector<GroupTerms> groups;
  double objective = 0.0;  // mean over prompt groups
};

// Flattens a group's trajectories into one token batch, broadcasting each
// trajectory's advantage over its tokens.
inline TokenBatch token_batch(const PromptGroup& group, std::span<const double> advantages) {
  TokenBatch b;
  for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
    const auto& tr = group.trajectories[i];
    const std::size_t len = tr.logp_new.size();
    if (tr.logp_old.size() != len || (!tr.mask.empty() && tr.mask.size() != len) ||
        (!tr.kl_terms.empty() && tr.kl_terms.size() != len)) {
      fail(ErrorCode::kShapeMismatch, "trajectory " + std::to_string(i) + " has ragged token arrays");
    }
    b.logp_new.insert(b.logp_new.end(), tr.logp_new.begin(), tr.logp_new.end());
    b.logp_old.insert(b.logp_old.end(), tr.logp_old.begin(), tr.logp_old.end());
    b.advantages.insert(b.advantages.end(), len, advantages[i]);
    if (tr.mask.empty()) {
      b.mask.insert(b.mask.end(), len, 1.0);
    } else {
      b.mask.insert(b.mask.end(), tr.mask.begin(), tr.mask.end());
    }
    if (tr.kl_terms.empty()) {
      b.kl_terms.insert(b.kl_terms.end(), len, 0.0);
    } else {
      b.kl_terms.insert(b.kl_terms.end(), tr.kl_terms.begin(), tr.kl_terms.end());
    }
  }
  return b;
}

inline GroupTerms group_objective(const PromptGroup& group, const GrpoParams& params) {
  if (group.trajectories.size() != group.rewards.rewards.size()) {
    fail(ErrorCode::kShapeMismatch, "rewards and trajectories differ in count");
  }
  GroupTerms terms;
  terms.advantages = group_advantages(group.rewards);
  const TokenBatch batch = token_batch(group, terms.advantages);
  double sum = 0.0;
  for (std::size_t t = 0; t < batch.logp_new.size(); ++t) {
    if (!(batch.logp_new[t] <= 0.0) || !(batch.logp_old[t] <= 0.0)) {
      fail(ErrorCode::kPositiveLogprob, "token " + std::to_string(t) + " has a log-probability > 0");
    }
    const double ratio = std::exp(batch.logp_new[t] - batch.logp_old[t]);
    sum += clipped_surrogate(ratio, batch.advantages[t], params.clip_epsilon);
  }
  terms.surrogate = sum / static_cast<double>(group.trajectories.size());
  terms.kl = kl_penalty(batch, params.epsilon);
  terms.objective = terms.surrogate - params.beta * terms.kl;
  return terms;
}

inline ObjectiveTerms grpo_objective(std::span<const PromptGroup> groups, const GrpoParams& params) {
  if (groups.empty()) fail(ErrorCode::kInvalidParams, "no prompt groups");
  if (!(params.clip_epsilon > 0.0 && params.clip_epsilon < 1.0) || !(params.beta >= 0.0) ||
      !(params.epsilon > 0.0)) {
    fail(ErrorCode::kInvalidParams, "need clip_epsilon in (0,1), beta >= 0, epsilon > 0");
  }
  ObjectiveTerms out;
  for (const auto& g : groups) {
    out.groups.push_back(group_objective(g, params));
    out.objective += out.groups.back().objective;
  }
  out.objective /= static_cast<double>(groups.size());
  return out;
}

// ---------------------------------------------------------------------------
// JSON fixtures for cross-implementation checks.
//
// {
//   "clip_epsilon": 0.2, "beta": 0.04, "epsilon": 1e-6,
//   "groups": [ { "rewards": [...],
//                 "trajectories": [ { "logp_new": [...], "logp_old": [...],
//                                     "mask": [...]?, "kl_terms": [...]?,
//                                     "policy_dists": [[...]]?,
//                                     "ref_dists": [[...]]? } ] } ]
// }
//
// Per-token KL comes from kl_terms, or from policy_dists/ref_dists pairs.

struct Fixture {
  GrpoParams params;
  std::vector<PromptGroup> groups;
};

namespace detail {

inline std::vector<double> number_list(const nlohmann::json& j, const char* key, bool required) {
  if (!j.contains(key) || j.at(key).is_null()) {
    if (required) fail(ErrorCode::kInvalidParams, std::string("fixture lacks '") + key + "'");
    return {};
  }
  try {
    return j.at(key).get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kInvalidParams, std::string("'") + key + "' must be a list of numbers");
  }
}

inline double number_or(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) fail(ErrorCode::kInvalidParams, std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace detail

inline Fixture fixture_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("groups") || !j.at("groups").is_array()) {
    fail(ErrorCode::kInvalidParams, "fixture must be an object with a 'groups' array");
  }
  Fixture f;
  f.params.clip_epsilon = detail::number_or(j, "clip_epsilon", f.params.clip_epsilon);
  f.params.beta = detail::number_or(j, "beta", f.params.beta);
  f.params.epsilon = detail::number_or(j, "epsilon", f.params.epsilon);
  for (const auto& gj : j.at("groups")) {
    PromptGroup g;
    g.rewards.rewards = detail::number_list(gj, "rewards", true);
    g.rewards.epsilon = detail::number_or(gj, "epsilon", f.params.epsilon);
    if (!gj.contains("trajectories") || !gj.at("trajectories").is_array()) {
      fail(ErrorCode::kInvalidParams, "group lacks a 'trajectories' array");
    }
    for (const auto& tj : gj.at("trajectories")) {
      Trajectory t;
      t.logp_new = detail::number_list(tj, "logp_new", true);
      t.logp_old = detail::number_list(tj, "logp_old", true);
      t.mask = detail::number_list(tj, "mask", false);
      t.kl_terms = detail::number_list(tj, "kl_terms", false);
      if (tj.contains("policy_dists") || tj.contains("ref_dists")) {
        std::vector<std::vector<double>> p, q;
        try {
          p = tj.at("policy_dists").get<std::vector<std::vector<double>>>();
          q = tj.at("ref_dists").get<std::vector<std::vector<double>>>();
        } catch (const nlohmann::json::exception&) {
          fail(ErrorCode::kInvalidParams, "policy_dists and ref_dists must both be matrices");
        }
        if (p.size() != q.size()) fail(ErrorCode::kShapeMismatch, "policy/ref dists differ in length");
        t.kl_terms.clear();
        for (std::size_t k = 0; k < p.size(); ++k) t.kl_terms.push_back(kl_divergence(p[k], q[k]));
      }
      g.trajectories.push_back(std::move(t));
    }
    f.groups.push_back(std::move(g));
  }
  return f;
}

inline nlohmann::json terms_to_json(const ObjectiveTerms& terms, const GrpoParams& params) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : terms.groups) {
    groups.push_back({{"advantages", g.advantages},
                      {"surrogate", g.surrogate},
                      {"kl", g.kl},
                      {"objective", g.objective}});
  }
  return {{"conventions",
           {{"std", "population"}, {"epsilon_added_to", "std"}, {"log", "natural"}}},
          {"params",
           {{"clip_epsilon", params.clip_epsilon}, {"beta", params.beta}, {"epsilon", params.epsilon}}},
          {"groups", groups},
          {"objective", terms.objective}};
}

}  // namespace shift::grpo
