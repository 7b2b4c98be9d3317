#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace graphfolio {

// Explicit request wins, then the GRAPHFOLIO_THREADS environment variable,
// then hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GRAPHFOLIO_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

// Splits [0, n) into one contiguous chunk per worker and calls
// fn(begin, end) for each. Every index belongs to exactly one chunk, so
// kernels that write only to their own slots are race-free and produce
// identical results for any worker count.
inline void parallel_chunks(std::size_t n, int workers,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t w = workers > 0 ? std::size_t(workers) : 1;
  if (w > n) w = n;
  if (w == 1) {
    fn(0, n);
    return;
  }

  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(w);
  std::size_t base = n / w, extra = n % w, begin = 0;
  for (std::size_t i = 0; i < w; ++i) {
    std::size_t len = base + (i < extra ? 1 : 0);
    std::size_t end = begin + len;
    pool.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace graphfolio
