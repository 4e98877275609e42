#pragma once

#include <cstddef>
#include <functional>

namespace mummi::util {

/// Worker cap: MUMMI_THREADS when set (minimum 1), otherwise the hardware
/// concurrency.
std::size_t worker_threads();

/// Runs fn(0..n-1), possibly across worker threads. Tasks must be independent
/// (each evaluation episode owns its tapes and RNG streams).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mummi::util
