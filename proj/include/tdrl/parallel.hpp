#pragma once

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <functional>

namespace tdrl {

// Global thread cap. 0 = use OpenMP default. TDRL_THREADS env and the CLI
// --deterministic flag both route through set_thread_cap.
inline int& thread_cap_storage() {
  static int cap = -1;  // -1 = uninitialized, read env once
  return cap;
}

inline void set_thread_cap(int cap) { thread_cap_storage() = cap; }

inline int max_threads() {
  int& cap = thread_cap_storage();
  if (cap == -1) {
    cap = 0;
    if (const char* env = std::getenv("TDRL_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) cap = v;
    }
  }
  const int hw = omp_get_max_threads();
  return cap > 0 ? std::min(cap, hw) : hw;
}

// Static-schedule parallel loop; deterministic per-index work regardless of
// thread count as long as f(i) has no cross-index effects.
template <class F>
void parallel_for(std::ptrdiff_t n, F&& f) {
  const int nt = max_threads();
  if (nt <= 1 || n <= 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) f(i);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::ptrdiff_t i = 0; i < n; ++i) f(i);
}

// Serial twin kept for testing and benchmarking against the OpenMP path.
template <class F>
void serial_for(std::ptrdiff_t n, F&& f) {
  for (std::ptrdiff_t i = 0; i < n; ++i) f(i);
}

}  // namespace tdrl
