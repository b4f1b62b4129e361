#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace walklm {

// Worker count resolution: WALKLM_WORKERS env var wins, else hardware
// concurrency. Recorded in every resolved-config snapshot because FP
// reduction order (and therefore checkpoints) may depend on it.
inline int default_worker_count() {
  if (const char* env = std::getenv("WALKLM_WORKERS")) {
    int n = std::atoi(env);
    if (n < 1) throw std::runtime_error("WALKLM_WORKERS must be a positive integer, got '" + std::string(env) + "'");
    return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Splits [0, n) into exactly `workers` contiguous spans and runs
// fn(begin, end, worker_index) on each. Chunk boundaries depend only on
// (n, workers), never on timing, so writes into index-addressed slots are
// race-free and results are reproducible for a fixed worker count.
inline void parallel_for(int64_t n, int workers,
                         const std::function<void(int64_t, int64_t, int)>& fn) {
  if (n <= 0) return;
  if (workers < 1) workers = 1;
  if (workers == 1 || n == 1) {
    fn(0, n, 0);
    return;
  }
  int64_t spans = std::min<int64_t>(workers, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(spans));
  int64_t base = n / spans, rem = n % spans;
  int64_t begin = 0;
  for (int64_t w = 0; w < spans; ++w) {
    int64_t len = base + (w < rem ? 1 : 0);
    int64_t end = begin + len;
    pool.emplace_back([&fn, begin, end, w] { fn(begin, end, static_cast<int>(w)); });
    begin = end;
  }
  for (auto& t : pool) t.join();
}

}  // namespace walklm
