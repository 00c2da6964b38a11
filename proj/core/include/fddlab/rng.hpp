#pragma once

#include <cstdint>
#include <random>

#include "fddlab/types.hpp"

namespace fddlab {

using Rng = std::mt19937_64;

/// Deterministically derives an independent stream seed from a root seed and
/// up to three stream coordinates (SplitMix64 finalizer chain).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

inline Rng make_stream(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0) {
  return Rng(derive_seed(root, a, b, c));
}

/// Fills a vector with i.i.d. circularly-symmetric CN(0, 1) entries.
CVector complex_normal(Rng& rng, Index n);
CMatrix complex_normal(Rng& rng, Index rows, Index cols);

// Stream tags used to keep independent consumers apart.
namespace stream {
inline constexpr std::uint64_t kTrain = 0x7472'6169'6eULL;
inline constexpr std::uint64_t kEval = 0x6576'616cULL;
inline constexpr std::uint64_t kNoise = 0x6e6f'6973'65ULL;
inline constexpr std::uint64_t kPilot = 0x7069'6c6fULL;
inline constexpr std::uint64_t kFit = 0x6669'74ULL;
}  // namespace stream

}  // namespace fddlab
