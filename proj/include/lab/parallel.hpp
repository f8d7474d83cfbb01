#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace lab {

/// Worker count: LAB_THREADS caps it when set, otherwise hardware concurrency.
inline int thread_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (const char* env = std::getenv("LAB_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = std::min(hw, static_cast<int>(v));
  }
  return hw;
}

/// Static block partition of [0, count). Each index is visited exactly once and
/// results must be written to per-index slots; reductions happen afterwards in
/// deterministic (sorted) order, never inside the parallel region.
template <class F>
void parallel_for(std::size_t count, F&& body) {
  const int nt = std::min<std::size_t>(thread_count(), count ? count : 1);
  if (nt <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  const std::size_t chunk = (count + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace lab
