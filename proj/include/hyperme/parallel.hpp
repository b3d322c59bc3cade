#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace hyperme {

/// Worker cap: set_worker_count() override, else HYPERME_THREADS (0 or
/// unset means hardware concurrency).
std::size_t worker_count();
/// 0 restores the environment/default behaviour.
void set_worker_count(std::size_t workers);

/// Runs body(i) for i in [0, n) over static contiguous chunks. Each index
/// writes only its own slot, so results do not depend on the worker count.
/// If several indices throw, the exception of the lowest index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hyperme
