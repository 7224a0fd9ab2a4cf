#pragma once

#include <cstdint>
#include <functional>

namespace lottery {

// Worker count used by chunked loops: LOTTERY_THREADS when set, otherwise
// hardware concurrency clamped to [1, 16].
int default_thread_count();

// Fixed chunking: chunk c covers [c*chunk_size, min((c+1)*chunk_size, n)).
std::int64_t chunk_count(std::int64_t n, std::int64_t chunk_size);

// Runs `body(chunk_index, begin, end)` for every chunk, possibly on several
// threads. Chunk boundaries depend only on (n, chunk_size), never on the
// thread count, so callers that accumulate into per-chunk buffers and merge
// them in chunk order get run-to-run identical reductions.
void parallel_chunks(std::int64_t n, std::int64_t chunk_size,
                     const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& body,
                     int threads = 0);

}  // namespace lottery
