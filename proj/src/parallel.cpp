#include "facegeom/parallel.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace facegeom {

int thread_count() {
  static const int cached = [] {
    int n = 0;
    if (const char* env = std::getenv("FACEGEOM_THREADS")) {
      n = std::atoi(env);
      if (n < 0) n = 0;
    }
    if (n == 0) n = int(std::thread::hardware_concurrency());
    return n > 0 ? n : 1;
  }();
  return cached;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int threads = thread_count();
  // Not worth spawning threads for small loops.
  if (threads <= 1 || n < 4096) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    const std::size_t begin = n * t / threads;
    const std::size_t end = n * (t + 1) / threads;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace facegeom
