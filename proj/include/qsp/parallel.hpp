#pragma once

#include <cstdint>
#include <functional>

namespace qsp {

// Runs body(i) for every i in [0, n) across a small thread pool. Bodies must
// write only to their own preallocated slots so the result is independent of
// the thread count. threads <= 0 uses the hardware concurrency; the first
// exception thrown by any body is rethrown after all workers join.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body);

} // namespace qsp
