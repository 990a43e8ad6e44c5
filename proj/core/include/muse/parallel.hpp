#pragma once

#include <cstddef>
#include <functional>

namespace muse {

/// Worker cap from MUSE_THREADS, else the number of logical cores (at least 1).
std::size_t default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index runs exactly
/// once; results must be written to disjoint locations so the outcome does not
/// depend on scheduling. The first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace muse
