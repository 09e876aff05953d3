#pragma once

#include <Eigen/Sparse>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace ctmhd {

/// Thread cap: CTMHD_THREADS if set, else hardware concurrency.
inline int max_threads() {
  if (const char* env = std::getenv("CTMHD_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

using TripletVec = std::vector<Eigen::Triplet<double>>;

/// Runs fn(item, buffer) over [0, n) with per-chunk buffers merged in chunk
/// order, so the resulting triplet sequence is identical to a serial run
/// regardless of thread count.
inline TripletVec parallel_triplets(int n, const std::function<void(int, TripletVec&)>& fn) {
  const int threads = std::min(max_threads(), std::max(1, n));
  if (threads == 1) {
    TripletVec out;
    for (int i = 0; i < n; ++i) fn(i, out);
    return out;
  }
  const int chunks = threads * 4;
  std::vector<TripletVec> buffers(chunks);
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int tid = 0; tid < threads; ++tid)
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
        const long lo = static_cast<long>(n) * c / chunks;
        const long hi = static_cast<long>(n) * (c + 1) / chunks;
        for (long i = lo; i < hi; ++i) fn(static_cast<int>(i), buffers[c]);
      }
    });
  for (auto& t : pool) t.join();
  TripletVec out;
  size_t total = 0;
  for (const auto& b : buffers) total += b.size();
  out.reserve(total);
  for (const auto& b : buffers) out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace ctmhd
