#pragma once

#include <cstddef>
#include <functional>

namespace voxelhop {

// Worker count resolution: explicit argument > VOXELHOP_THREADS env var >
// hardware concurrency (capped at 8).
int default_thread_count();
int resolve_threads(int requested);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers must make
// each index write to its own output slot; any reduction happens afterwards
// in index order, so results are independent of scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace voxelhop
