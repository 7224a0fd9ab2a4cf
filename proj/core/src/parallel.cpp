#include "lottery/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace lottery {

int default_thread_count() {
  if (const char* env = std::getenv("LOTTERY_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return std::min(n, 64);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 16u));
}

std::int64_t chunk_count(std::int64_t n, std::int64_t chunk_size) {
  if (n <= 0) return 0;
  return (n + chunk_size - 1) / chunk_size;
}

void parallel_chunks(std::int64_t n, std::int64_t chunk_size,
                     const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& body,
                     int threads) {
  const std::int64_t chunks = chunk_count(n, chunk_size);
  if (chunks == 0) return;
  if (threads <= 0) threads = default_thread_count();
  threads = static_cast<int>(std::min<std::int64_t>(threads, chunks));

  if (threads == 1) {
    for (std::int64_t c = 0; c < chunks; ++c)
      body(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t c = next.fetch_add(1, std::memory_order_relaxed);
        if (c >= chunks) return;
        body(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace lottery
