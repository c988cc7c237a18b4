#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace iia {

/// Worker count: IIA_THREADS if set and positive, else hardware concurrency.
inline int thread_count() {
  static const int n = [] {
    if (const char* env = std::getenv("IIA_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return n;
}

/// Calls fn(begin, end) on disjoint contiguous chunks of [0, n). Chunks never
/// share output, so callers keep reductions serial for determinism.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_chunk = 1) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), std::max<std::size_t>(1, n / min_chunk));
  if (workers <= 1 || n == 0) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace iia
