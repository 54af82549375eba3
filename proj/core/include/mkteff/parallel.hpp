#pragma once

#include <cstddef>
#include <functional>

namespace mkteff {

/// Resolves a requested job count: 0 means one per hardware thread.
unsigned resolve_jobs(unsigned jobs) noexcept;

/// Calls fn(i) for every i in [0, n) on up to `jobs` threads. Indices are
/// handed out dynamically, so fn must not depend on scheduling order. The
/// first exception thrown by any call is rethrown after all threads join.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace mkteff
