#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "shift/error.hpp"

namespace shift {

// Dense row-major matrix with value semantics.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorCode::kShapeMismatch, "matrix data does not match shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  T& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

namespace detail {

// Four independent partial sums in a fixed order: the result does not depend
// on how callers split work across threads, and the dependency chain stays
// short enough for the hot selection loops.
template <typename RA, typename RB>
double squared_distance(const RA& a, const RB& b) noexcept {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double d0 = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    const double d1 =
        static_cast<double>(a[i + 1]) - static_cast<double>(b[i + 1]);
    const double d2 =
        static_cast<double>(a[i + 2]) - static_cast<double>(b[i + 2]);
    const double d3 =
        static_cast<double>(a[i + 3]) - static_cast<double>(b[i + 3]);
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s0 += d * d;
  }
  return (s0 + s1) + (s2 + s3);
}

template <typename R>
double squared_norm(const R& a) noexcept {
  double s = 0.0;
  for (const auto v : a) s += static_cast<double>(v) * static_cast<double>(v);
  return s;
}

}  // namespace detail

template <typename RA, typename RB>
double euclidean_distance(const RA& a, const RB& b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kDimMismatch, "distance between vectors of dim " +
                                      std::to_string(a.size()) + " and " +
                                      std::to_string(b.size()));
  }
  return std::sqrt(detail::squared_distance(a, b));
}

}  // namespace shift
