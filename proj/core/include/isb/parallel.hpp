#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace isb {

// Number of workers for a requested degree; <= 0 means all hardware threads.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Calls f(i) for i in [0, n) on contiguous static blocks. Each index must write only its own
// output slot, which keeps results independent of the thread count. The exception from the
// lowest failing block is rethrown.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(resolve_threads(threads),
                                                                           static_cast<int>(std::max<std::size_t>(n, 1)))));
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace isb
