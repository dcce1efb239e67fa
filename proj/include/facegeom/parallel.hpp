// Minimal deterministic data-parallel loop.
//
// Parallelism is only used for embarrassingly parallel per-index work (e.g.
// nearest-neighbor queries) where every index writes exclusively its own
// output slot, so results are identical for any thread count.
#pragma once

#include <cstddef>
#include <functional>

namespace facegeom {

// Worker count: FACEGEOM_THREADS env var; 0 or unset means hardware
// concurrency. Read once and cached.
int thread_count();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace facegeom
