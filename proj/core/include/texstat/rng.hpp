// SPDX-License-Identifier: Apache-2.0
//
// Platform-independent random streams. Dataset files are reproducible only
// because every draw goes through these integer algorithms:
//   - SplitMix64 (Steele, Lea, Flood 2014) to expand seeds,
//   - xoshiro256** 1.0 (Blackman, Vigna 2018) for the stream itself,
//   - Lemire's multiply-shift with rejection for bounded integers.
#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace texstat {

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Sub-seed for a named purpose: splitmix64 over seed ^ FNV-1a(label).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;
/// Sub-seed for an indexed stream, e.g. one per dataset image.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~std::uint64_t{0}; }
  result_type operator()() noexcept;

  /// Uniform integer in [lo, hi], inclusive. Requires lo <= hi.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace texstat
