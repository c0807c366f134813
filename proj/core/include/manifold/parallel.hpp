#pragma once

#include <functional>

namespace manifold {

// Maximum worker count: MANIFOLD_PROBE_THREADS if set (>=1), otherwise the
// hardware concurrency.
int thread_cap();

// Runs fn(i) for i in [0, n). Each index owns its output slot, so results do
// not depend on the schedule. Falls back to a serial loop when the cap is 1
// or n is small.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace manifold
