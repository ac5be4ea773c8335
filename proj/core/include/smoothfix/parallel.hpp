#pragma once

#include <cstddef>
#include <functional>

namespace smoothfix {

// Process-wide worker count used by every Monte Carlo loop. Results never
// depend on it: work items carry their own derived seeds and reductions run
// in index order after the parallel section.
void set_workers(std::size_t workers);
std::size_t workers();

// Calls body(i) for i in [0, count), distributing contiguous chunks over the
// configured workers. Exceptions thrown by body are rethrown on the caller.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t)>& body);

}  // namespace smoothfix
