#pragma once

#include <thread>
#include <vector>

namespace lrgw {

// Static block partition over [0, n). threads <= 1 runs inline, so the
// default configuration touches no threading machinery at all. Blocks are
// assigned deterministically; callers that reduce must do so in block order.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  int nt = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    int lo = static_cast<int>(static_cast<long long>(n) * t / nt);
    int hi = static_cast<int>(static_cast<long long>(n) * (t + 1) / nt);
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace lrgw
