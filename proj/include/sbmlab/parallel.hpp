#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace sbmlab {

/// Seed for stream `index` derived from a base seed (splitmix64 finalizer).
/// Every replicate owns a generator seeded this way, so results do not depend
/// on how replicates are scheduled across threads.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Runs body(i) for i in [0, n) on up to `jobs` threads (0 means hardware
/// concurrency). The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body);

}  // namespace sbmlab
