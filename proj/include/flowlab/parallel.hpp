#pragma once

#include <cstddef>
#include <functional>

namespace flowlab::parallel {

/// Caps the worker pool. Zero restores the default (FLOWLAB_THREADS, then
/// the hardware concurrency).
void set_worker_count(unsigned n);
unsigned worker_count();

/// Calls fn(i) for i in [0, n) on the worker pool. Callers must only write
/// to index-owned storage; the first exception thrown by any task is
/// rethrown after all workers join.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace flowlab::parallel
