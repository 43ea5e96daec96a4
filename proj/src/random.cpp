#include "qfb/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qfb {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index));
}

double GaussianSource::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  constexpr double kUnit = 1.0 / 9007199254740992.0;  // 2^-53
  // u1 in (0, 1] keeps the logarithm finite.
  const double u1 = static_cast<double>((engine_() >> 11) + 1) * kUnit;
  const double u2 = static_cast<double>(engine_() >> 11) * kUnit;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

WienerSource::WienerSource(std::uint64_t seed, double dt) : gauss_(seed) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  scale_ = std::sqrt(dt);
}

std::vector<double> wiener_increments(std::uint64_t seed, std::size_t n_steps, double dt) {
  WienerSource source(seed, dt);
  std::vector<double> dw(n_steps);
  for (auto& v : dw) v = source.next();
  return dw;
}

}  // namespace qfb
