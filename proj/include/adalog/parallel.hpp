#pragma once

#include <cstddef>
#include <functional>

namespace adalog {

/// Resolves a --threads value: 0 means one worker per hardware thread.
std::size_t resolve_threads(std::size_t requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index must
/// write only its own output slot; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace adalog
