#pragma once

// Budgeted subset selection over RIRS feature spaces.
//
// All selectors break ties by lowest pool index and are deterministic for a
// fixed input; results do not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "shift/error.hpp"
#include "shift/matrix.hpp"
#include "shift/parallel.hpp"
#include "shift/pool_io.hpp"
#include "shift/rirs.hpp"

namespace shift {

enum class Method { kQwff, kFarthestFirst, kTopkUtility, kKmeansCenter, kRandom };

constexpr std::string_view method_name(Method m) {
  switch (m) {
    case Method::kQwff: return "qwff";
    case Method::kFarthestFirst: return "farthest_first";
    case Method::kTopkUtility: return "topk_utility";
    case Method::kKmeansCenter: return "kmeans_center";
    case Method::kRandom: return "random";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  for (auto m : {Method::kQwff, Method::kFarthestFirst, Method::kTopkUtility,
                 Method::kKmeansCenter, Method::kRandom}) {
    if (method_name(m) == name) return m;
  }
  fail(ErrorCode::kInvalidParams, "unknown selection method '" + std::string(name) + "'");
}

inline constexpr std::string_view kTieBreak = "lowest pool index";

struct SelectionConfig {
  std::size_t budget = 1;
  Method method = Method::kQwff;
  FeatureVariant variant = FeatureVariant::kStartPlusDelta;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct SelectionStep {
  std::size_t pick = 0;  // 1-based
  std::size_t pool_index = 0;
  std::string instance_id;
  std::optional<double> utility;
  std::optional<double> coverage_distance;
  std::optional<double> score;
};

struct SelectionResult {
  std::string method;
  std::size_t budget = 0;
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  std::string init_policy;
  std::vector<std::string> selected_ids;
  std::vector<std::size_t> selected_indices;
  std::vector<SelectionStep> steps;
};

// Coverage features as one flat matrix plus per-row utilities (q_tilde).
struct FeatureSpace {
  std::vector<std::string> ids;
  Matrix<double> phi;
  std::vector<double> utility;

  std::size_t size() const noexcept { return phi.rows(); }
};

inline FeatureSpace make_feature_space(std::span<const RirsFeatures> features) {
  FeatureSpace space;
  if (features.empty()) return space;
  const std::size_t dim = features.front().phi.size();
  std::vector<double> flat;
  flat.reserve(features.size() * dim);
  for (const auto& f : features) {
    if (f.phi.size() != dim) {
      fail(ErrorCode::kDimMismatch, "instance '" + f.instance_id +
                                        "' has a coverage feature of dim " +
                                        std::to_string(f.phi.size()) + ", expected " +
                                        std::to_string(dim));
    }
    flat.insert(flat.end(), f.phi.begin(), f.phi.end());
    space.ids.push_back(f.instance_id);
    space.utility.push_back(f.q_tilde);
  }
  space.phi = Matrix<double>(features.size(), dim, std::move(flat));
  return space;
}

namespace detail {

inline void check_budget(std::size_t pool_size, std::size_t budget) {
  if (pool_size == 0) fail(ErrorCode::kEmptyPool, "cannot select from an empty pool");
  if (budget == 0) fail(ErrorCode::kInvalidParams, "budget must be >= 1");
  if (budget > pool_size) {
    fail(ErrorCode::kBudgetExceedsPool, "budget " + std::to_string(budget) +
                                            " exceeds pool size " +
                                            std::to_string(pool_size));
  }
}

inline void check_space(const FeatureSpace& space) {
  if (space.ids.size() != space.size() || space.utility.size() != space.size()) {
    fail(ErrorCode::kShapeMismatch, "feature space ids/utilities do not match rows");
  }
}

inline SelectionStep make_step(const FeatureSpace& space, std::size_t pick,
                               std::size_t index) {
  SelectionStep step;
  step.pick = pick;
  step.pool_index = index;
  step.instance_id = space.ids[index];
  step.utility = space.utility[index];
  return step;
}

inline void finish(SelectionResult& result) {
  for (const auto& s : result.steps) {
    result.selected_ids.push_back(s.instance_id);
    result.selected_indices.push_back(s.pool_index);
  }
}

// Lowers min_dist[i] to the distance from row i to row `picked` for every
// unselected row, scoring each with score(i, min_dist[i]). Returns the best.
template <typename Score>
ArgMax update_and_scan(const Matrix<double>& phi, std::size_t picked,
                       std::vector<double>& min_dist, const std::vector<char>& selected,
                       std::size_t threads, Score&& score) {
  const auto anchor = phi.row(picked);
  return parallel_argmax(phi.rows(), threads,
                         [&](std::size_t begin, std::size_t end, ArgMax& local) {
                           for (std::size_t i = begin; i < end; ++i) {
                             if (selected[i]) continue;
                             const double d =
                                 std::sqrt(squared_distance(phi.row(i), anchor));
                             if (d < min_dist[i]) min_dist[i] = d;
                             local.offer(score(i, min_dist[i]), i);
                           }
                         });
}

}  // namespace detail

// Quality-weighted farthest-first: start from argmax utility, then repeatedly
// take argmax of utility(x) * d(x, S) with d the Euclidean distance to the
// nearest selected feature.
inline SelectionResult qwff_select(const FeatureSpace& space, std::size_t budget,
                                   std::size_t threads = 1) {
  detail::check_space(space);
  detail::check_budget(space.size(), budget);
  const std::size_t n = space.size();
  SelectionResult result;
  result.method = method_name(Method::kQwff);
  result.budget = budget;
  result.init_policy = "argmax utility";

  std::vector<char> selected(n, 0);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  const auto& u = space.utility;

  ArgMax first = parallel_argmax(n, threads, [&](std::size_t b, std::size_t e, ArgMax& m) {
    for (std::size_t i = b; i < e; ++i) m.offer(u[i], i);
  });
  std::size_t picked = first.index;
  selected[picked] = 1;
  auto step = detail::make_step(space, 1, picked);
  step.score = u[picked];
  result.steps.push_back(std::move(step));

  for (std::size_t k = 2; k <= budget; ++k) {
    const ArgMax best = detail::update_and_scan(
        space.phi, picked, min_dist, selected, threads,
        [&](std::size_t i, double d) { return u[i] * d; });
    picked = best.index;
    selected[picked] = 1;
    auto s = detail::make_step(space, k, picked);
    s.coverage_distance = min_dist[picked];
    s.score = best.value;
    result.steps.push_back(std::move(s));
  }
  detail::finish(result);
  return result;
}

// Plain farthest-first traversal (CoreSet / greedy k-center). The seed is the
// point farthest from the centroid of all features.
inline SelectionResult farthest_first_select(const FeatureSpace& space, std::size_t budget,
                                             std::size_t threads = 1) {
  detail::check_space(space);
  detail::check_budget(space.size(), budget);
  const std::size_t n = space.size();
  const std::size_t dim = space.phi.cols();
  SelectionResult result;
  result.method = method_name(Method::kFarthestFirst);
  result.budget = budget;
  result.init_policy = "farthest from feature centroid";

  std::vector<double> centroid(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = space.phi.row(i);
    for (std::size_t d = 0; d < dim; ++d) centroid[d] += row[d];
  }
  for (double& c : centroid) c /= static_cast<double>(n);

  const std::span<const double> center(centroid);
  ArgMax seed = parallel_argmax(n, threads, [&](std::size_t b, std::size_t e, ArgMax& m) {
    for (std::size_t i = b; i < e; ++i) {
      m.offer(std::sqrt(detail::squared_distance(space.phi.row(i), center)), i);
    }
  });

  std::vector<char> selected(n, 0);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::size_t picked = seed.index;
  selected[picked] = 1;
  auto step = detail::make_step(space, 1, picked);
  step.coverage_distance = seed.value;  // distance to the centroid
  step.score = seed.value;
  result.steps.push_back(std::move(step));

  for (std::size_t k = 2; k <= budget; ++k) {
    const ArgMax best = detail::update_and_scan(space.phi, picked, min_dist, selected,
                                                threads,
                                                [](std::size_t, double d) { return d; });
    picked = best.index;
    selected[picked] = 1;
    auto s = detail::make_step(space, k, picked);
    s.coverage_distance = best.value;
    s.score = best.value;
    result.steps.push_back(std::move(s));
  }
  detail::finish(result);
  return result;
}

// B largest utilities, descending; ties by lowest index.
inline SelectionResult topk_utility_select(const FeatureSpace& space, std::size_t budget) {
  detail::check_space(space);
  detail::check_budget(space.size(), budget);
  std::vector<std::size_t> order(space.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return space.utility[a] > space.utility[b];
  });
  SelectionResult result;
  result.method = method_name(Method::kTopkUtility);
  result.budget = budget;
  result.init_policy = "none";
  for (std::size_t k = 0; k < budget; ++k) {
    auto s = detail::make_step(space, k + 1, order[k]);
    s.score = space.utility[order[k]];
    result.steps.push_back(std::move(s));
  }
  detail::finish(result);
  return result;
}

struct KmeansOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // on the largest centroid shift
};

// Lloyd's k-means with k-means++ seeding. Returns k x dim centroids.
inline Matrix<double> kmeans(const Matrix<double>& points, std::size_t k, std::uint64_t seed,
                             const KmeansOptions& options = {}, std::size_t threads = 1) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  detail::check_budget(n, k);
  std::mt19937_64 rng(seed);

  Matrix<double> centroids(k, dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> is_center(n, 0);
  auto add_center = [&](std::size_t c, std::size_t idx) {
    is_center[idx] = 1;
    std::copy_n(points.row(idx).begin(), dim, centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::squared_distance(points.row(i), points.row(idx)));
    }
  };
  add_center(0, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += d2[i];
    std::size_t chosen = n;
    if (total > 0.0) {
      const double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        chosen = i;
        if (acc > r) break;
      }
    }
    if (chosen == n) {
      // every remaining point coincides with a center
      for (std::size_t i = 0; i < n && chosen == n; ++i) {
        if (!is_center[i]) chosen = i;
      }
    }
    add_center(c, chosen);
  }

  std::vector<std::size_t> assign(n, 0);
  std::vector<double> assign_d2(n, 0.0);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          const double d = detail::squared_distance(points.row(i), centroids.row(c));
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        assign[i] = best;
        assign_d2[i] = best_d;
      }
    });

    Matrix<double> next(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = next.row(assign[i]);
      const auto p = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) row[d] += p[d];
      ++counts[assign[i]];
    }
    std::vector<char> reseeded(n, 0);
    for (std::size_t c = 0; c < k; ++c) {
      auto row = next.row(c);
      if (counts[c] > 0) {
        for (double& v : row) v /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!reseeded[i] && assign_d2[i] > far_d) {
          far_d = assign_d2[i];
          far = i;
        }
      }
      reseeded[far] = 1;
      std::copy_n(points.row(far).begin(), dim, row.begin());
    }

    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      max_shift = std::max(max_shift,
                           std::sqrt(detail::squared_distance(next.row(c), centroids.row(c))));
    }
    centroids = std::move(next);
    if (max_shift <= options.tolerance) break;
  }
  return centroids;
}

// One instance per k-means centroid (k = budget): the nearest instance not
// already taken by an earlier centroid.
inline SelectionResult kmeans_center_select(const FeatureSpace& space, std::size_t budget,
                                            std::uint64_t seed, std::size_t threads = 1,
                                            const KmeansOptions& options = {}) {
  detail::check_space(space);
  detail::check_budget(space.size(), budget);
  const Matrix<double> centroids = kmeans(space.phi, budget, seed, options, threads);
  SelectionResult result;
  result.method = method_name(Method::kKmeansCenter);
  result.budget = budget;
  result.seed = seed;
  result.init_policy = "k-means++";
  std::vector<char> selected(space.size(), 0);
  for (std::size_t c = 0; c < budget; ++c) {
    std::size_t best = space.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (selected[i]) continue;
      const double d = detail::squared_distance(space.phi.row(i), centroids.row(c));
      if (best == space.size() || d < best_d) {
        best_d = d;
        best = i;
      }
    }
    selected[best] = 1;
    auto s = detail::make_step(space, c + 1, best);
    s.coverage_distance = std::sqrt(best_d);
    result.steps.push_back(std::move(s));
  }
  detail::finish(result);
  return result;
}

// Uniform sample without replacement (partial Fisher-Yates).
inline SelectionResult random_select(std::span<const std::string> ids, std::size_t budget,
                                     std::uint64_t seed) {
  detail::check_budget(ids.size(), budget);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(ids.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SelectionResult result;
  result.method = method_name(Method::kRandom);
  result.budget = budget;
  result.seed = seed;
  result.init_policy = "mt19937_64";
  for (std::size_t k = 0; k < budget; ++k) {
    const std::size_t j =
        std::uniform_int_distribution<std::size_t>(k, perm.size() - 1)(rng);
    std::swap(perm[k], perm[j]);
    SelectionStep s;
    s.pick = k + 1;
    s.pool_index = perm[k];
    s.instance_id = ids[perm[k]];
    result.steps.push_back(std::move(s));
  }
  detail::finish(result);
  return result;
}

inline SelectionResult select(const FeatureSpace& space, const SelectionConfig& config) {
  SelectionResult r;
  switch (config.method) {
    case Method::kQwff: r = qwff_select(space, config.budget, config.threads); break;
    case Method::kFarthestFirst:
      r = farthest_first_select(space, config.budget, config.threads);
      break;
    case Method::kTopkUtility: r = topk_utility_select(space, config.budget); break;
    case Method::kKmeansCenter:
      r = kmeans_center_select(space, config.budget, config.seed, config.threads);
      break;
    case Method::kRandom: {
      r = random_select(space.ids, config.budget, config.seed);
      for (auto& s : r.steps) s.utility = space.utility[s.pool_index];
      break;
    }
  }
  r.variant = std::string(variant_name(config.variant));
  r.seed = config.seed;
  return r;
}

inline SelectionResult select(std::span<const RirsFeatures> features,
                              const SelectionConfig& config) {
  return select(make_feature_space(features), config);
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {
inline nlohmann::json optional_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}
}  // namespace detail

inline nlohmann::json selection_to_json(const SelectionResult& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"pick", s.pick},
                     {"pool_index", s.pool_index},
                     {"instance_id", s.instance_id},
                     {"utility", detail::optional_json(s.utility)},
                     {"coverage_distance", detail::optional_json(s.coverage_distance)},
                     {"score", detail::optional_json(s.score)}});
  }
  nlohmann::json config = {{"method", r.method},
                           {"budget", r.budget},
                           {"tie_break", kTieBreak},
                           {"init_policy", r.init_policy}};
  config["variant"] = r.variant ? nlohmann::json(*r.variant) : nlohmann::json(nullptr);
  config["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
  return {{"config", config}, {"selected_ids", r.selected_ids}, {"steps", steps}};
}

// selection.json plus selected_ids.txt (one id per line) in `dir`.
inline void write_selection(const SelectionResult& r, const std::filesystem::path& dir) {
  detail::write_file_bytes(dir / "selection.json", selection_to_json(r).dump(2) + "\n");
  std::string ids;
  for (const auto& id : r.selected_ids) ids += id + "\n";
  detail::write_file_bytes(dir / "selected_ids.txt", ids);
}

}  // namespace shift
