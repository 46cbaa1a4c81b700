#include "streamgauge/key_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "streamgauge/rng.hpp"

namespace streamgauge {

bool KeyDistribution::valid() const {
  if (key_space == 0) return false;
  switch (mode) {
    case KeyDistMode::normal:
      return stddev > 0.0 && std::isfinite(mean) && std::isfinite(stddev);
    case KeyDistMode::single_key:
      return fixed_key < key_space;
    case KeyDistMode::uniform:
      return true;
  }
  return false;
}

std::uint64_t draw_key(std::uint64_t seq, const KeyDistribution& dist, std::uint64_t seed) {
  switch (dist.mode) {
    case KeyDistMode::single_key:
      return dist.fixed_key;
    case KeyDistMode::uniform:
      return bounded(mix64(seed, seq), dist.key_space);
    case KeyDistMode::normal:
      break;
  }
  // Box-Muller from two counter-derived uniforms.
  const double u1 = to_unit_double(mix64(seed, seq * 2));
  const double u2 = to_unit_double(mix64(seed, seq * 2 + 1));
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  const double z = r * std::cos(2.0 * std::numbers::pi * u2);
  const double raw = dist.mean + dist.stddev * z;
  const double clamped =
      std::clamp(raw, 0.0, static_cast<double>(dist.key_space) - 1.0);
  return static_cast<std::uint64_t>(clamped);
}

}  // namespace streamgauge
