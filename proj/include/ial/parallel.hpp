#pragma once

#include <cstddef>
#include <functional>

namespace ial {

/// Process-wide worker count used by parallel_for. 1 means run inline.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n), split into contiguous chunks across the
/// configured workers. Callers must make iterations write disjoint outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace ial
