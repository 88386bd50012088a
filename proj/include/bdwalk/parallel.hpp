#pragma once

// Replica-level parallelism. Results land at their replica index, so any
// reduction done afterwards in index order is independent of worker count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bdwalk {

template <class T, class F>
std::vector<T> run_replicas(std::size_t replicas, int workers, F&& fn) {
  std::vector<T> out(replicas);
  const std::size_t w = std::clamp<std::size_t>(workers < 1 ? 1 : workers, 1, std::max<std::size_t>(replicas, 1));
  if (w == 1) {
    for (std::size_t r = 0; r < replicas; ++r) out[r] = fn(r);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= replicas) return;
      try {
        out[r] = fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(replicas);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < w; ++i) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace bdwalk
