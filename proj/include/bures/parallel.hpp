#pragma once

// Thread fan-out with order-deterministic reductions.
//
// Work items are written into index-addressed slots and reduced by a fixed
// pairwise tree, so results are bit-identical regardless of thread count.

#include <algorithm>
#include <cstdlib>
#include <cstddef>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace bures {

/// Worker cap from BURES_THREADS, else hardware concurrency.
inline unsigned max_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BURES_THREADS")) {
    try {
      const long requested = std::stol(env);
      if (requested >= 1) return static_cast<unsigned>(std::min<long>(requested, 1024));
    } catch (...) {
    }
  }
  return hw;
}

/// Calls fn(i) for i in [0, n). Items are split into contiguous chunks of at
/// least `min_chunk`; stays on the calling thread when only one chunk results.
/// The first exception thrown by any worker is rethrown on the caller.
/// Nested calls from inside a worker run serially.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_chunk = 32) {
  static thread_local bool inside_worker = false;
  const std::size_t chunks =
      inside_worker ? 1
                    : std::min<std::size_t>(max_threads(),
                                            std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
  if (chunks <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::thread> workers;
  workers.reserve(chunks);
  const std::size_t per = (n + chunks - 1) / chunks;
  for (std::size_t c = 0; c < chunks; ++c) {
    workers.emplace_back([&, c] {
      inside_worker = true;
      try {
        const std::size_t lo = c * per;
        const std::size_t hi = std::min(n, lo + per);
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Pairwise sum over items[lo, hi) with a fixed split point.
template <typename T>
T pairwise_sum(const std::vector<T>& items, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return items[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(items, lo, mid) + pairwise_sum(items, mid, hi);
}

/// Requires a non-empty input.
template <typename T>
T pairwise_sum(const std::vector<T>& items) {
  return pairwise_sum(items, 0, items.size());
}

}  // namespace bures
