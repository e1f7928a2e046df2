#pragma once

#include <cstddef>
#include <functional>

namespace deepbeat {

/// Process-wide worker count used by parallel_for. Defaults to 1, or to the
/// value of DEEPBEAT_THREADS when set.
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n). Work items must write disjoint outputs;
/// results are then independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace deepbeat
