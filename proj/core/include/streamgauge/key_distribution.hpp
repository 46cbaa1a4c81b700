#pragma once

#include <cstdint>

namespace streamgauge {

enum class KeyDistMode : std::uint8_t {
  normal = 0,
  single_key = 1,
  uniform = 2,
};

/// How generator key fields (user_id, gem_pack_id) are drawn. Draws are a
/// pure function of (seq, dist, seed): no sampler state is kept anywhere.
struct KeyDistribution {
  KeyDistMode mode = KeyDistMode::normal;
  std::uint64_t key_space = 10'000;
  double mean = 5'000.0;
  double stddev = 1'000.0;
  std::uint64_t fixed_key = 0;

  friend bool operator==(const KeyDistribution&, const KeyDistribution&) = default;

  bool valid() const;

  static KeyDistribution make_normal(std::uint64_t key_space, double mean, double stddev) {
    return KeyDistribution{KeyDistMode::normal, key_space, mean, stddev, 0};
  }
  static KeyDistribution make_single(std::uint64_t key) {
    return KeyDistribution{KeyDistMode::single_key, key + 1, 0.0, 0.0, key};
  }
  static KeyDistribution make_uniform(std::uint64_t key_space) {
    return KeyDistribution{KeyDistMode::uniform, key_space, 0.0, 0.0, 0};
  }
};

/// Deterministic key draw. Normal mode clamps the Gaussian into
/// [0, key_space) rather than resampling; tail bias is irrelevant here and
/// clamping keeps the draw a fixed-cost pure function.
std::uint64_t draw_key(std::uint64_t seq, const KeyDistribution& dist, std::uint64_t seed);

}  // namespace streamgauge
