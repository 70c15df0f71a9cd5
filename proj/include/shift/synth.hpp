#pragma once

// Synthetic anchor pools with planted structure, for tests and demos.
//
// Instances are split round-robin over `clusters` Gaussian modes. Cluster k
// has its own start-state center, a shift direction, and a planted shift
// magnitude 1 + 2k, so mean q per cluster increases with k.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "shift/csv.hpp"
#include "shift/error.hpp"
#include "shift/matrix.hpp"
#include "shift/pool_io.hpp"

namespace shift {

struct SynthParams {
  std::size_t n = 100;
  std::size_t dim = 16;
  std::size_t layers = 1;
  std::size_t clusters = 4;
  std::uint64_t seed = 0;
  std::size_t samples = 0;  // rollouts per instance; 0 = no rollout records
  double center_scale = 4.0;
  double start_noise = 0.5;
  double shift_noise = 0.05;
  double layer_noise = 0.2;
};

struct SynthPool {
  Pool pool;
  std::vector<std::size_t> cluster;
  std::vector<double> planted_utility;
  std::vector<RolloutRecord> rollouts;
};

inline std::string synth_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "inst_%06zu", i);
  return buf;
}

inline double planted_shift_magnitude(std::size_t cluster) {
  return 1.0 + 2.0 * static_cast<double>(cluster);
}

inline SynthPool generate_pool(const SynthParams& p) {
  if (p.n == 0 || p.dim == 0 || p.layers == 0 || p.clusters == 0) {
    fail(ErrorCode::kInvalidParams, "n, dim, layers and clusters must all be >= 1");
  }
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix<double> centers(p.clusters, p.dim);
  Matrix<double> directions(p.clusters, p.dim);
  for (std::size_t k = 0; k < p.clusters; ++k) {
    for (double& v : centers.row(k)) v = p.center_scale * normal(rng);
    double norm = 0.0;
    auto dir = directions.row(k);
    while (!(norm > 1e-6)) {
      for (double& v : dir) v = normal(rng);
      norm = std::sqrt(detail::squared_norm(dir));
    }
    for (double& v : dir) v /= norm;
  }

  SynthPool out;
  for (std::size_t i = 0; i < p.n; ++i) {
    const std::size_t k = i % p.clusters;
    const double magnitude = planted_shift_magnitude(k);
    std::vector<double> start(p.dim), shift(p.dim);
    for (std::size_t d = 0; d < p.dim; ++d) {
      start[d] = centers(k, d) + p.start_noise * normal(rng);
      shift[d] = magnitude * directions(k, d) + p.shift_noise * normal(rng);
    }
    AnchorRecord r{synth_id(i), Matrix<float>(p.layers, p.dim), Matrix<float>(p.layers, p.dim)};
    for (std::size_t l = 0; l < p.layers; ++l) {
      for (std::size_t d = 0; d < p.dim; ++d) {
        const double jitter = p.layers > 1 ? p.layer_noise * normal(rng) : 0.0;
        r.start_states(l, d) = static_cast<float>(start[d] + jitter);
        r.end_states(l, d) = static_cast<float>(start[d] + jitter + shift[d]);
      }
    }
    out.pool.records.push_back(std::move(r));
    out.cluster.push_back(k);
    out.planted_utility.push_back(magnitude);

    if (p.samples > 0) {
      RolloutRecord rr;
      rr.instance_id = synth_id(i);
      // More distinct answers and lower token confidence in higher clusters.
      std::uniform_int_distribution<std::size_t> answer(0, k);
      const std::size_t emb_dim = 8;
      std::vector<double> base(emb_dim);
      for (double& v : base) v = normal(rng);
      std::vector<double> emb;
      for (std::size_t s = 0; s < p.samples; ++s) {
        rr.answers.push_back(std::string(1, static_cast<char>('A' + answer(rng) % 26)));
        for (std::size_t e = 0; e < emb_dim; ++e) {
          emb.push_back(base[e] + 0.2 * (1.0 + static_cast<double>(k)) * normal(rng));
        }
      }
      rr.cot_embeddings = Matrix<double>(p.samples, emb_dim, std::move(emb));
      const std::size_t q_len = 8 + static_cast<std::size_t>(rng() % 56);
      const std::size_t a_len = 16 + static_cast<std::size_t>(rng() % 240);
      for (std::size_t t = 0; t < q_len; ++t) {
        rr.question_token_logprobs.push_back(-std::abs(normal(rng)) * (0.5 + 0.1 * k));
      }
      for (std::size_t t = 0; t < std::min<std::size_t>(a_len, 32); ++t) {
        rr.answer_token_logprobs.push_back(-std::abs(normal(rng)) * (0.2 + 0.1 * k));
      }
      rr.question_token_len = q_len;
      rr.response_token_len = a_len;
      out.rollouts.push_back(std::move(rr));
    }
  }
  out.pool.manifest = make_manifest("synth-" + std::to_string(p.seed), out.pool.records);
  return out;
}

// labels.csv: instance_id,cluster,planted_utility
inline std::string synth_labels_csv(const SynthPool& s) {
  std::string out = "instance_id,cluster,planted_utility\n";
  for (std::size_t i = 0; i < s.pool.records.size(); ++i) {
    out += csv_field(s.pool.records[i].instance_id) + "," + std::to_string(s.cluster[i]) + "," +
           csv_number(s.planted_utility[i]) + "\n";
  }
  return out;
}

}  // namespace shift
