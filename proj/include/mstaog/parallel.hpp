#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mstaog {

/// Number of workers to use for `jobs` (0 = hardware concurrency).
inline int resolve_jobs(int jobs) {
  if (jobs > 0) return jobs;
  return std::max(1, int(std::thread::hardware_concurrency()));
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads with static striding.
/// Results must be written to per-index slots so the output does not depend
/// on scheduling. The first exception is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::size_t(resolve_jobs(jobs)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mstaog
