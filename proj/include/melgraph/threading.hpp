#pragma once

#include <cstdint>
#include <functional>

namespace melgraph {

// Worker count for parallel_for: MELGRAPH_THREADS env var if set (>=1),
// otherwise std::thread::hardware_concurrency().
int max_threads();

// Runs fn(begin, end) over a block partition of [0, n). Blocks write to
// disjoint ranges, so results are identical to a serial run. Falls back to
// a plain call when n is small or only one worker is available.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace melgraph
