#pragma once

#include <cstddef>
#include <functional>

// Deterministic data parallelism: loops split into contiguous chunks over
// worker threads, each index writing only its own output slot; reductions are
// performed sequentially by the caller afterwards.  Results are therefore
// independent of the thread count (SPDSHRINK_THREADS, default: hardware
// concurrency).

namespace spdshrink {

// Worker count for this process: SPDSHRINK_THREADS if set to a positive
// integer, else std::thread::hardware_concurrency(), floored at 1.  Cached.
int thread_count();

// Invokes fn(i) for i in [0, n).  Runs serially when thread_count() == 1 or
// n is small.  fn must only write state owned by index i.  The first
// exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace spdshrink
