#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace deplen {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Stable seed for a coordinate path under `base`. Distinct paths give
/// unrelated seeds; the mapping does not depend on platform or call order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

// Independent random streams inside one training session.
enum class Stream : std::uint64_t { kData = 1, kInit = 2, kShuffle = 3 };

Rng make_stream(std::uint64_t session_seed, Stream stream);

}  // namespace deplen
