#pragma once

#include <cstdint>
#include <random>

namespace spectf {

using Rng = std::mt19937_64;

/// Independent deterministic substream for (seed, stream, index); replicate b
/// of a bootstrap or repetition r of a benchmark gets the same draws no matter
/// which worker runs it.
inline Rng substream(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

// Stream identifiers, so different consumers of one seed never overlap.
namespace streams {
inline constexpr std::uint64_t covariates = 1;
inline constexpr std::uint64_t validation_covariates = 2;
inline constexpr std::uint64_t repetition = 3;
inline constexpr std::uint64_t validation = 4;
inline constexpr std::uint64_t bootstrap = 5;
inline constexpr std::uint64_t folds = 6;
inline constexpr std::uint64_t auxiliary = 7;
} // namespace streams

} // namespace spectf
