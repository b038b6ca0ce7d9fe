#pragma once

#include <cstddef>
#include <functional>

namespace copurchase {

/// Worker cap shared by all stages. 0 means "use hardware concurrency".
void set_thread_limit(unsigned threads) noexcept;
unsigned thread_limit() noexcept;

/// Runs body(i) for i in [0, count) on up to thread_limit() threads.
/// Indices are handed out in static contiguous blocks, so any per-index
/// output written to a pre-sized slot is deterministic. The first exception
/// thrown by a worker is rethrown on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace copurchase
