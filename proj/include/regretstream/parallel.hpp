#pragma once

#include <cstddef>
#include <functional>

namespace regretstream {

/// Worker count: REGRETSTREAM_THREADS if set, else `requested` if > 0, else
/// hardware concurrency.
unsigned resolve_threads(unsigned requested);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling. The first exception thrown by any
/// body is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace regretstream
