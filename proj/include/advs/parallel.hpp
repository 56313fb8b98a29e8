#pragma once

#include <cstddef>
#include <functional>

namespace advs {

/// Worker threads to use: ADVS_THREADS when set to a positive value,
/// otherwise the hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for every i in [0, n) across worker threads. Work items must
/// be independent; the first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace advs
