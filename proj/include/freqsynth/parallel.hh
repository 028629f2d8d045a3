/*
 * parallel.hh
 *
 * bounded thread fan-out for data-parallel loops
 */

#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace freqsynth {

/* number of worker threads: hardware concurrency capped by FREQSYNTH_THREADS */
inline unsigned thread_budget() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0)
    hw = 1;
  if (const char* env = std::getenv("FREQSYNTH_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1)
      hw = std::min<long>(hw, cap);
  }
  return hw;
}

/* runs body(begin,end) on contiguous chunks of [0,n); chunks are disjoint, so
 * bodies may write to disjoint slices of shared buffers without locking */
template <class Body>
void parallel_for(std::size_t n, Body&& body, unsigned n_threads = 0) {
  if (n_threads == 0)
    n_threads = thread_budget();
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(n, 1)));
  if (n_threads <= 1 || n < 2) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads - 1);
  std::size_t chunk = (n + n_threads - 1) / n_threads;
  for (unsigned t = 1; t < n_threads; t++) {
    std::size_t lo = std::min(n, t * chunk);
    std::size_t hi = std::min(n, lo + chunk);
    if (lo < hi)
      pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  body(std::size_t{0}, std::min(n, chunk));
  for (auto& th : pool)
    th.join();
}

}  // namespace freqsynth
