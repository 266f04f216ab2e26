#pragma once

#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace nqs {

// Static contiguous partition of [0, n) into n_workers blocks.  Every parallel
// reduction in the engine uses this partition and merges partial results in
// worker order, so outputs are byte-identical for a fixed worker count and
// agree across worker counts up to floating-point reassociation.
inline std::pair<std::size_t, std::size_t> worker_slice(std::size_t n, int n_workers,
                                                        int worker) {
  const std::size_t base = n / static_cast<std::size_t>(n_workers);
  const std::size_t rem = n % static_cast<std::size_t>(n_workers);
  const std::size_t w = static_cast<std::size_t>(worker);
  const std::size_t lo = w * base + std::min(w, rem);
  const std::size_t hi = lo + base + (w < rem ? 1 : 0);
  return {lo, hi};
}

// Runs fn(worker, lo, hi) on each slice; worker 0 runs on the calling thread.
inline void run_partitioned(std::size_t n, int n_workers,
                            const std::function<void(int, std::size_t, std::size_t)>& fn) {
  if (n_workers < 1) throw std::invalid_argument("worker count must be >= 1");
  if (n_workers == 1 || n == 0) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_workers - 1);
  for (int w = 1; w < n_workers; ++w) {
    auto [lo, hi] = worker_slice(n, n_workers, w);
    pool.emplace_back(fn, w, lo, hi);
  }
  auto [lo0, hi0] = worker_slice(n, n_workers, 0);
  fn(0, lo0, hi0);
  for (auto& t : pool) t.join();
}

}  // namespace nqs
