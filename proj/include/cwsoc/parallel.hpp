#pragma once

// Fixed-chunk parallel map. Work is cut into chunks independent of the
// worker count and results are returned in chunk order, so the outcome is
// the same for any number of workers.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cwsoc {

/// Worker count from CWSOC_WORKERS, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("CWSOC_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return static_cast<unsigned>(w);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

template <class R, class F>
std::vector<R> parallel_chunks(std::size_t chunks, F&& work, unsigned workers = worker_count()) {
  std::vector<R> out(chunks);
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), std::max<std::size_t>(chunks, 1)));
  if (workers == 1) {
    for (std::size_t k = 0; k < chunks; ++k) out[k] = work(k);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < chunks;) {
        try {
          out[k] = work(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace cwsoc
