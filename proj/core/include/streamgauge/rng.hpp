#pragma once

#include <cstdint>

namespace streamgauge {

/// Stateless 64-bit mixer (splitmix64 finalizer). All randomness in the
/// workload is derived from mix(seed, counter) so every draw is a pure
/// function of its inputs and replays are byte-identical.
constexpr std::uint64_t mix64(std::uint64_t key, std::uint64_t data) noexcept {
  std::uint64_t z = key ^ (data + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit_double(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Unbiased-enough bounded draw via 128-bit multiply (Lemire reduction
/// without the rejection loop; bias is < 2^-64 * bound).
constexpr std::uint64_t bounded(std::uint64_t bits, std::uint64_t bound) noexcept {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(bits) * static_cast<unsigned __int128>(bound)) >> 64);
}

}  // namespace streamgauge
