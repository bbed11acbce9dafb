#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace vmfa {

/// Splits [0, n) into one contiguous chunk per worker and runs fn(worker,
/// begin, end) on each. Chunk boundaries depend only on (n, threads), so
/// per-worker partial results merged in worker order give deterministic
/// reductions for a fixed thread count. threads <= 1 runs inline.
inline void parallel_for(std::int64_t n, int threads,
                         const std::function<void(int, std::int64_t,
                                                  std::int64_t)>& fn) {
  if (n <= 0) return;
  if (threads > n) threads = static_cast<int>(n);
  if (threads <= 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::int64_t base = n / threads;
  const std::int64_t rem = n % threads;
  std::int64_t begin = 0;
  for (int w = 0; w < threads; ++w) {
    const std::int64_t len = base + (w < rem ? 1 : 0);
    pool.emplace_back(fn, w, begin, begin + len);
    begin += len;
  }
  for (auto& t : pool) t.join();
}

}  // namespace vmfa
