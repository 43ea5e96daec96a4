#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace qfb {

/// SplitMix64 finalizer (Steele, Lea & Flood). Used only to derive seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the independent stream for trajectory `index` of an ensemble seeded with
/// `seed`:  splitmix64(seed XOR splitmix64(index)). Index 0 is the stream used by a
/// single simulated trajectory.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

/// Standard normal deviates from std::mt19937_64 through the Box-Muller transform.
/// Both the engine and the transform are fixed here (not left to the standard
/// library's normal_distribution) so that streams are identical across toolchains.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double next();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0;
  bool has_spare_ = false;
};

/// Wiener increments dW ~ N(0, dt).
class WienerSource {
 public:
  WienerSource(std::uint64_t seed, double dt);

  double next() { return scale_ * gauss_.next(); }

 private:
  GaussianSource gauss_;
  double scale_;
};

std::vector<double> wiener_increments(std::uint64_t seed, std::size_t n_steps, double dt);

}  // namespace qfb
