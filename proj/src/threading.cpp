#include "softdsl/threading.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace sdsl {

namespace {

int resolve_default() {
  if (const char* env = std::getenv("SOFTDSL_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return std::min(n, 64);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(hw == 0 ? 1u : hw, 8u));
}

int g_threads = 0;

}  // namespace

int thread_count() {
  if (g_threads == 0) g_threads = resolve_default();
  return g_threads;
}

void set_thread_count(int n) { g_threads = std::max(1, n); }

void parallel_chunks(size_t n, const void*, void (*fn)(void*, size_t, size_t, int), void* ctx) {
  int nt = thread_count();
  if (n == 0) return;
  size_t chunks = static_cast<size_t>(nt);
  if (n < chunks * 16 || nt == 1) {  // small loops run serially
    fn(ctx, 0, n, 0);
    return;
  }
  size_t per = (n + chunks - 1) / chunks;
#pragma omp parallel for num_threads(nt) schedule(static, 1)
  for (int c = 0; c < nt; c++) {
    size_t b = per * static_cast<size_t>(c);
    size_t e = std::min(n, b + per);
    if (b < e) fn(ctx, b, e, c);
  }
}

}  // namespace sdsl
