#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bspa {

/// Runs fn(i) for i in [0, n) on at most `max_inflight` threads. Results must be
/// written to index-addressed slots so the outcome is independent of completion
/// order. If any call throws, the exception from the lowest index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int max_inflight, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, max_inflight));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(workers, n); ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace bspa
