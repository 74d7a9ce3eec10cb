#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace semloc::detail {

/// Splits [0, n) into contiguous chunks, one per worker, and runs
/// fn(begin, end, worker) on each. Runs inline when workers <= 1. The first
/// exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    fn(std::size_t{0}, n, 0);
    return;
  }
  const std::size_t used = std::min(w, n);
  std::vector<std::exception_ptr> errors(used);
  std::vector<std::thread> pool;
  pool.reserve(used);
  for (std::size_t i = 0; i < used; ++i) {
    const std::size_t begin = n * i / used, end = n * (i + 1) / used;
    pool.emplace_back([&, i, begin, end] {
      try {
        fn(begin, end, static_cast<int>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace semloc::detail
