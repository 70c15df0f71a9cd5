#pragma once

// Reasoning-induced representation shift (RIRS) features.
//
// For each instance the per-layer anchor states are averaged into a start
// vector s and an end vector e. The shift is delta = e - s, its utility is
// q = ||delta||, and the selection utility is q_tilde = ln(1 + q). The
// coverage feature phi is a unit vector built from s, delta, or [s; delta].

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shift/error.hpp"
#include "shift/matrix.hpp"
#include "shift/parallel.hpp"
#include "shift/pool_io.hpp"

namespace shift {

enum class FeatureVariant { kStart, kDelta, kStartPlusDelta };

inline constexpr double kZeroFeatureNorm = 1e-12;

constexpr std::string_view variant_name(FeatureVariant v) {
  switch (v) {
    case FeatureVariant::kStart: return "s";
    case FeatureVariant::kDelta: return "delta";
    case FeatureVariant::kStartPlusDelta: return "s_plus_delta";
  }
  return "?";
}

inline FeatureVariant parse_variant(std::string_view name) {
  if (name == "s") return FeatureVariant::kStart;
  if (name == "delta") return FeatureVariant::kDelta;
  if (name == "s_plus_delta") return FeatureVariant::kStartPlusDelta;
  fail(ErrorCode::kInvalidParams, "unknown feature variant '" + std::string(name) + "'");
}

struct RirsFeatures {
  std::string instance_id;
  std::vector<double> s;
  std::vector<double> e;
  std::vector<double> delta;
  double q = 0.0;
  double q_tilde = 0.0;
  std::vector<double> phi;
  FeatureVariant variant = FeatureVariant::kStartPlusDelta;
};

// Component-wise mean over the rows of an L x D matrix.
template <typename T>
std::vector<double> average_layers(const Matrix<T>& states) {
  if (states.rows() == 0 || states.cols() == 0) {
    fail(ErrorCode::kEmptyMatrix, "cannot average an empty layer matrix");
  }
  std::vector<double> mean(states.cols(), 0.0);
  for (std::size_t l = 0; l < states.rows(); ++l) {
    const auto row = states.row(l);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += static_cast<double>(row[d]);
  }
  const double inv = 1.0 / static_cast<double>(states.rows());
  for (double& v : mean) v *= inv;
  return mean;
}

inline std::vector<double> delta(std::span<const double> s, std::span<const double> e) {
  if (s.size() != e.size()) {
    fail(ErrorCode::kDimMismatch, "start dim " + std::to_string(s.size()) +
                                      " vs end dim " + std::to_string(e.size()));
  }
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = e[i] - s[i];
  return out;
}

inline double utility(std::span<const double> shift) {
  return std::sqrt(detail::squared_norm(shift));
}

inline double utility_transform(double q) {
  if (!(q >= 0.0)) {
    fail(ErrorCode::kNegativeUtility, "utility must be >= 0, got " + std::to_string(q));
  }
  return std::log1p(q);
}

inline std::vector<double> coverage_feature(std::span<const double> s,
                                            std::span<const double> shift,
                                            FeatureVariant variant) {
  std::vector<double> phi;
  switch (variant) {
    case FeatureVariant::kStart:
      phi.assign(s.begin(), s.end());
      break;
    case FeatureVariant::kDelta:
      phi.assign(shift.begin(), shift.end());
      break;
    case FeatureVariant::kStartPlusDelta:
      phi.reserve(s.size() + shift.size());
      phi.insert(phi.end(), s.begin(), s.end());
      phi.insert(phi.end(), shift.begin(), shift.end());
      break;
  }
  const double norm = std::sqrt(detail::squared_norm(phi));
  if (!(norm > kZeroFeatureNorm)) {
    fail(ErrorCode::kZeroFeature, "coverage feature '" +
                                      std::string(variant_name(variant)) +
                                      "' has norm " + std::to_string(norm));
  }
  for (double& v : phi) v /= norm;
  return phi;
}

inline RirsFeatures featurize(const AnchorRecord& record, FeatureVariant variant) {
  try {
    RirsFeatures f;
    f.instance_id = record.instance_id;
    f.variant = variant;
    f.s = average_layers(record.start_states);
    f.e = average_layers(record.end_states);
    f.delta = delta(f.s, f.e);
    f.q = utility(f.delta);
    f.q_tilde = utility_transform(f.q);
    f.phi = coverage_feature(f.s, f.delta, variant);
    return f;
  } catch (const Error& e) {
    fail(e.code(), "instance '" + record.instance_id + "': " + e.what());
  }
}

// One feature record per anchor record, in pool order regardless of threads.
inline std::vector<RirsFeatures> featurize_pool(std::span<const AnchorRecord> records,
                                                FeatureVariant variant,
                                                std::size_t threads = 1) {
  std::vector<RirsFeatures> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = featurize(records[i], variant);
  });
  // Chunks are contiguous and rethrown in order, so the reported failure is
  // always the first bad instance in pool order.
  return out;
}

}  // namespace shift
