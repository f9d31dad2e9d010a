#pragma once

#include <cstddef>
#include <functional>

namespace wwf {

// Worker count from WWF_THREADS (default: hardware concurrency, at least 1).
int thread_count();

// Runs fn(i) for i in [0, n) over contiguous static partitions. Callers must
// make fn(i) depend only on i so output is independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace wwf
