#pragma once

#include <cstddef>
#include <functional>

namespace sphcov {

// Process-wide cap on worker threads. 0 restores the hardware default.
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs fn(begin, end) over a static partition of [0, n). Workers write to
// disjoint output slots, so results do not depend on the thread count.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace sphcov
