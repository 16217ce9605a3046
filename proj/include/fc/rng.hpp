#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace fc {

/// SplitMix64 stream. Fully specified, so draws are identical on every platform
/// (unlike the std distributions, whose algorithms are implementation-defined).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

 private:
  std::uint64_t state_;
};

/// Finalizer of SplitMix64; a good 64-bit bijective mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based seed derivation: independent of call order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// Uniform integer in [0, bound) by rejection; bound must be > 0.
std::uint64_t uniform_index(SplitMix64& rng, std::uint64_t bound);

/// Uniform double in [0, 1) with 53 random bits.
double to_unit_interval(std::uint64_t bits) noexcept;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t digest_tokens(std::span<const std::uint32_t> ids) noexcept;

}  // namespace fc
