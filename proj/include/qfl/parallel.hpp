#pragma once

#include <cstddef>
#include <functional>

namespace qfl {

/// Worker count: QFLBENCH_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Each index must write only to its own output
/// slot; results are then identical for any worker count. The first exception
/// thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace qfl
