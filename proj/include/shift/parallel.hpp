#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

namespace shift {

// Splits [0, n) into at most `threads` contiguous chunks and runs
// fn(begin, end) on each. The first exception thrown by any chunk is
// rethrown on the calling thread after all chunks finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      workers.emplace_back([&, t, begin, end] {
        try {
          fn(begin, end);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// (value, index) pair for argmax reductions. Larger value wins; equal values
// resolve to the lower index, which makes the reduction independent of how
// the range was partitioned.
struct ArgMax {
  double value = -std::numeric_limits<double>::infinity();
  std::size_t index = std::numeric_limits<std::size_t>::max();

  bool valid() const noexcept {
    return index != std::numeric_limits<std::size_t>::max();
  }

  void offer(double v, std::size_t i) noexcept {
    if (!valid() || v > value || (v == value && i < index)) {
      value = v;
      index = i;
    }
  }

  void merge(const ArgMax& other) noexcept {
    if (other.valid()) offer(other.value, other.index);
  }
};

// Runs body(begin, end, local) over disjoint chunks of [0, n), each with its
// own ArgMax, then merges the chunk results.
template <typename Body>
ArgMax parallel_argmax(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  const std::size_t chunk = n == 0 ? 1 : (n + threads - 1) / threads;
  std::vector<ArgMax> partial(threads);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    body(begin, end, partial[begin / chunk]);
  });
  ArgMax best;
  for (const auto& p : partial) best.merge(p);
  return best;
}

}  // namespace shift
