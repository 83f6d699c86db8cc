// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#pragma once

#include <cstdint>
#include <initializer_list>

namespace tprm {

// SplitMix64. Chosen over <random> engines because its output is specified
// bit-for-bit in a few lines, so a remote sidecar in another language can
// reproduce seeded rollouts exactly (see docs/wire_protocol.md).
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return finalize(state_);
  }

  /// Uniform double in [0, 1) with 53 bits of resolution.
  constexpr double next_double() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  static constexpr std::uint64_t finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Stable seed derivation: folds each part into the running hash.
inline constexpr std::uint64_t derive_seed(std::uint64_t base,
                                           std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = SplitMix64::finalize(base);
  for (auto p : parts) h = SplitMix64::finalize(h ^ SplitMix64::finalize(p + 0x9E3779B97F4A7C15ULL));
  return h;
}

}  // namespace tprm
