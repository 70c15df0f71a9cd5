#pragma once

// Random pool generators shared by unit and acceptance tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "shift/pool_io.hpp"
#include "shift/rirs.hpp"
#include "shift/select.hpp"

namespace shift::fixtures {

struct LayerPair {
  std::vector<AnchorRecord> per_layer;  // L rows per anchor
  std::vector<AnchorRecord> averaged;   // the same pool with L = 1
};

// Per-layer values are dyadic rationals chosen so that the layer mean is
// exactly representable in float32; the pre-averaged dump then carries no
// extra rounding.
inline LayerPair dyadic_layer_pool(std::mt19937_64& rng, std::size_t n, std::size_t layers,
                                   std::size_t dim) {
  std::uniform_int_distribution<int> mean_q(-4096, 4096);
  std::uniform_int_distribution<int> off_q(-512, 512);
  LayerPair out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "inst" + std::to_string(i);
    AnchorRecord full{id, Matrix<float>(layers, dim), Matrix<float>(layers, dim)};
    AnchorRecord avg{id, Matrix<float>(1, dim), Matrix<float>(1, dim)};
    for (int which = 0; which < 2; ++which) {
      auto& target = which == 0 ? full.start_states : full.end_states;
      auto& mean_row = which == 0 ? avg.start_states : avg.end_states;
      for (std::size_t d = 0; d < dim; ++d) {
        const double mean = mean_q(rng) / 64.0;
        double acc = 0.0;
        for (std::size_t l = 0; l + 1 < layers; ++l) {
          const double off = off_q(rng) / 64.0;
          target(l, d) = static_cast<float>(mean + off);
          acc += off;
        }
        target(layers - 1, d) = static_cast<float>(mean - acc);
        mean_row(0, d) = static_cast<float>(mean);
      }
    }
    out.per_layer.push_back(std::move(full));
    out.averaged.push_back(std::move(avg));
  }
  return out;
}

inline std::vector<AnchorRecord> gaussian_pool(std::mt19937_64& rng, std::size_t n,
                                               std::size_t layers, std::size_t dim) {
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<AnchorRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    AnchorRecord r{"inst" + std::to_string(i), Matrix<float>(layers, dim),
                   Matrix<float>(layers, dim)};
    for (float& v : r.start_states.data()) v = nd(rng);
    for (float& v : r.end_states.data()) v = nd(rng);
    out.push_back(std::move(r));
  }
  return out;
}

// Random unit-norm coverage features with log-normal-ish utilities.
inline FeatureSpace random_space(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  FeatureSpace s;
  std::vector<double> flat;
  std::uniform_real_distribution<double> ud(0.0, 3.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = oracle::random_unit(rng, dim);
    flat.insert(flat.end(), v.begin(), v.end());
    s.ids.push_back("inst" + std::to_string(i));
    s.utility.push_back(std::log1p(ud(rng)));
  }
  s.phi = Matrix<double>(n, dim, std::move(flat));
  return s;
}

inline oracle::Rows rows_of(const Matrix<double>& m) {
  oracle::Rows out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

}  // namespace shift::fixtures
