#pragma once

// Independent reference implementations used only by tests. None of these
// call into the library's numeric paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace shift::oracle {

using Vec = std::vector<double>;
using Rows = std::vector<Vec>;

inline double dist(const Vec& a, const Vec& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i];
    s += d * d;
  }
  return static_cast<double>(std::sqrt(s));
}

inline long double norm_ld(const Vec& v) {
  long double s = 0.0L;
  for (double x : v) s += static_cast<long double>(x) * x;
  return std::sqrt(s);
}

// Recomputes d(x, S) from scratch each step and scores every unselected
// candidate by utility * d; step 1 takes argmax utility.
inline std::vector<std::size_t> qwff(const Rows& phi, const Vec& utility, std::size_t budget) {
  std::vector<std::size_t> picked;
  std::vector<bool> in(phi.size(), false);
  std::size_t first = 0;
  for (std::size_t i = 1; i < phi.size(); ++i) {
    if (utility[i] > utility[first]) first = i;
  }
  picked.push_back(first);
  in[first] = true;
  while (picked.size() < budget) {
    std::size_t best = phi.size();
    double best_score = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      if (in[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t s : picked) d = std::min(d, dist(phi[i], phi[s]));
      const double score = utility[i] * d;
      if (best == phi.size() || score > best_score) {
        best = i;
        best_score = score;
      }
    }
    picked.push_back(best);
    in[best] = true;
  }
  return picked;
}

// max over points of the distance to the nearest center.
inline double covering_radius(const Rows& pts, const std::vector<std::size_t>& centers) {
  double r = 0.0;
  for (const auto& p : pts) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t c : centers) d = std::min(d, dist(p, pts[c]));
    r = std::max(r, d);
  }
  return r;
}

// Optimal k-center radius with centers restricted to pool points, by
// enumerating all k-subsets.
inline double optimal_k_center_radius(const Rows& pts, std::size_t k) {
  const std::size_t n = pts.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    best = std::min(best, covering_radius(pts, idx));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

// O(n^2) Kendall tau-b.
inline double kendall_tau_b(const Vec& x, const Vec& y) {
  long long conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++tx;
      } else if (dy == 0) {
        ++ty;
      } else if ((dx > 0) == (dy > 0)) {
        ++conc;
      } else {
        ++disc;
      }
    }
  }
  return static_cast<double>(conc - disc) /
         std::sqrt(static_cast<double>(conc + disc + tx) * static_cast<double>(conc + disc + ty));
}

// 1 - 6 sum d^2 / (n (n^2 - 1)) for tie-free data.
inline double spearman_closed_form(const Vec& x, const Vec& y) {
  const std::size_t n = x.size();
  auto rank = [n](const Vec& v) {
    Vec r(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t below = 0;
      for (std::size_t j = 0; j < n; ++j) below += v[j] < v[i];
      r[i] = static_cast<double>(below + 1);
    }
    return r;
  };
  const Vec rx = rank(x), ry = rank(y);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double nn = static_cast<double>(n);
  return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

// GRPO objective recomputed token by token from the raw fixture fields.
struct Traj {
  Vec logp_new, logp_old, mask, kl;
};
struct Group {
  Vec rewards;
  std::vector<Traj> trajs;
};

inline double grpo_objective(const std::vector<Group>& groups, double clip, double beta,
                             double eps) {
  double total = 0.0;
  for (const auto& g : groups) {
    const double n = static_cast<double>(g.rewards.size());
    double mean = 0.0;
    for (double r : g.rewards) mean += r / n;
    double var = 0.0;
    for (double r : g.rewards) var += (r - mean) * (r - mean) / n;
    const double sd = std::sqrt(var);
    double surrogate = 0.0, kl_num = 0.0, kl_den = 0.0;
    for (std::size_t i = 0; i < g.trajs.size(); ++i) {
      const double adv = (g.rewards[i] - mean) / (sd + eps);
      const auto& t = g.trajs[i];
      for (std::size_t k = 0; k < t.logp_new.size(); ++k) {
        const double rho = std::exp(t.logp_new[k] - t.logp_old[k]);
        const double unclipped = rho * adv;
        const double lo = 1.0 - clip, hi = 1.0 + clip;
        const double c = rho < lo ? lo : (rho > hi ? hi : rho);
        surrogate += (unclipped < c * adv ? unclipped : c * adv);
        kl_num += t.mask[k] * t.kl[k];
        kl_den += t.mask[k];
      }
    }
    total += surrogate / n - beta * (kl_num / (kl_den + eps));
  }
  return total / static_cast<double>(groups.size());
}

// ---------------------------------------------------------------------------
// Generators

inline Vec random_vec(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(dim);
  for (double& x : v) x = nd(rng);
  return v;
}

inline Vec random_unit(std::mt19937_64& rng, std::size_t dim) {
  Vec v;
  long double n = 0.0L;
  do {
    v = random_vec(rng, dim);
    n = norm_ld(v);
  } while (n < 1e-3L);
  for (double& x : v) x = static_cast<double>(x / n);
  return v;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("shift_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace shift::oracle
