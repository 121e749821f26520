#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace asclf {

/// Splits [0, n) into contiguous chunks, one per worker, and calls
/// fn(begin, end) on each. Callers write only to their own index range, so
/// results do not depend on the worker count. The first exception thrown by
/// any chunk is rethrown on the calling thread.
template <typename Fn>
void ParallelFor(Eigen::Index n, int workers, Fn&& fn) {
  if (n <= 0) return;
  const Eigen::Index w = std::clamp<Eigen::Index>(workers, 1, n);
  if (w == 1) {
    fn(Eigen::Index{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex mu;
  const Eigen::Index chunk = (n + w - 1) / w;
  for (Eigen::Index t = 0; t < w; ++t) {
    const Eigen::Index begin = t * chunk;
    const Eigen::Index end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

/// workers <= 0 means hardware concurrency.
inline int ResolveWorkers(int workers) {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace asclf
