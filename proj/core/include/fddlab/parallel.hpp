#pragma once

#include <cstddef>
#include <functional>

namespace fddlab {

/// Worker count for parallel loops: FDDLAB_THREADS if set and positive,
/// otherwise the hardware concurrency.
int worker_count();

/// Runs body(i) for i in [0, n) on the work pool. Iterations must write to
/// disjoint outputs; any reduction happens afterwards in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace fddlab
