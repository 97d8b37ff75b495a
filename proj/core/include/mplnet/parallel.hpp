#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mplnet {

/// Threads used by parallel_for when n_threads == 0: --threads flag,
/// MPLNET_THREADS env var, or hardware concurrency, in that order.
int default_thread_count();
void set_default_thread_count(int n);

/// Static-partition parallel loop over [begin, end). Each index is visited
/// exactly once; bodies must write only to slots owned by their index so
/// results are independent of the partitioning. Reductions belong outside.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, const Fn& body,
                  int n_threads = 0) {
  if (end <= begin) return;
  const std::size_t count = end - begin;
  int threads = n_threads > 0 ? n_threads : default_thread_count();
  threads = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count));
  if (threads == 1) {
    for (std::size_t i = begin; i < end; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t lo = begin + chunk * static_cast<std::size_t>(t);
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mplnet
