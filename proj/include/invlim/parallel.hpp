#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace invlim {

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads in contiguous chunks.
/// Each index must write only its own output slot, so results do not depend on the schedule.
template <class Fn>
void parallel_for(int n, Fn&& fn) {
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int workers = std::min(hw, std::max(1, n / 64));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace invlim
