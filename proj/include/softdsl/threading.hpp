#pragma once

#include <cstddef>

namespace sdsl {

// Number of worker threads for particle/grid loops. Resolution order:
// explicit set_thread_count(), SOFTDSL_THREADS, hardware concurrency capped
// at 8. Results are bitwise deterministic for a fixed count.
int thread_count();
void set_thread_count(int n);

// Static contiguous partition of [0, n); fn(begin, end, chunk_index) runs on
// each chunk. Chunk boundaries depend only on (n, thread_count), never on
// scheduling, so scatter buffers indexed by chunk reduce deterministically.
void parallel_chunks(size_t n, const void* tag, void (*fn)(void*, size_t, size_t, int), void* ctx);

template <typename F>
void parallel_for_chunks(size_t n, F&& f) {
  struct Ctx {
    F* f;
  } ctx{&f};
  parallel_chunks(
      n, nullptr,
      [](void* c, size_t b, size_t e, int chunk) { (*static_cast<Ctx*>(c)->f)(b, e, chunk); },
      &ctx);
}

}  // namespace sdsl
