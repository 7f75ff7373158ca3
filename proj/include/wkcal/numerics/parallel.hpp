#pragma once

#include <cstddef>
#include <functional>

namespace wkcal::numerics {

/// Process-wide worker count used by parallel_for; 0 means hardware concurrency.
void set_thread_count(unsigned threads) noexcept;
unsigned thread_count() noexcept;

/// Runs body(i) for i in [0, n). Results must be written by index so the outcome
/// does not depend on scheduling. The first exception (lowest index) is rethrown.
/// Calls made from inside a worker run serially on that worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace wkcal::numerics
