#pragma once

#include <cstddef>
#include <functional>

namespace nbd {

/// Worker count for data-parallel evaluation. Defaults to the NBD_THREADS
/// environment variable, else 1.
int thread_count();
void set_thread_count(int n);

/// Calls fn(i) for i in [0, n). Each index must write only its own output
/// slot, which keeps results independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace nbd
