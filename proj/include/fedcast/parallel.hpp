#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fedcast {

/// Worker count: FEDCAST_THREADS when set (floored at 1), otherwise hardware
/// concurrency capped at 4.
int resolve_thread_count();

/// Runs fn(i) for i in [0, n) on up to resolve_thread_count() threads.
/// Each index is independent work writing to its own slot, so results are
/// identical to a serial loop regardless of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace fedcast
