#pragma once

#include <cstddef>
#include <functional>

namespace specrcv {

/// Worker count: SPECRCV_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t thread_count();

/// Runs body(i) for every i in [0, count) on up to `threads` workers.
/// Work items are claimed dynamically, so callers that need bit-stable output
/// must make each item independent of scheduling. The first exception thrown
/// by any item is rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t threads = thread_count());

}  // namespace specrcv
