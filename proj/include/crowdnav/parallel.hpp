#pragma once

#include <cstddef>
#include <functional>

namespace crowdnav {

/// Worker count: CROWDSIM_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
int worker_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` threads. Each index runs
/// exactly once; results must be written to per-index slots so the outcome
/// does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace crowdnav
