#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dcs {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; bijective on 64-bit words.
std::uint64_t splitmix64(std::uint64_t x);

/// Folds each tag into `base` through splitmix64. Distinct tag sequences give
/// statistically independent streams, so callers can name substreams such as
/// (trial, sensor) without coordinating offsets.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

}  // namespace dcs
