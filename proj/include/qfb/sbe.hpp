#pragma once

#include <cmath>
#include <stdexcept>

#include "qfb/bloch.hpp"
#include "qfb/steady_state.hpp"

namespace qfb {

/// Precomputed coefficients of the conditioned (Ito) Bloch equations
///   db = (matrix b + offset) dt + n(b) dW,
///   n(b) = ( -s x^2 + f z + s,  -s x y,  -f x - s x z ),
/// with s = sqrt(gamma eta) and f = s + 2 lambda / sqrt(eta).
template <typename Scalar>
struct SbeCoefficients {
  DriftModel<Scalar> drift;
  Scalar measurement;  // s
  Scalar feedback;     // f
  Scalar sqrt_gamma;
  Scalar inv_sqrt_eta;

  explicit SbeCoefficients(const SystemParams<Scalar>& p) : drift(drift_model(p)) {
    using std::sqrt;
    if (!(p.eta > 0)) throw std::invalid_argument("conditioned dynamics require eta > 0");
    sqrt_gamma = sqrt(p.gamma);
    inv_sqrt_eta = 1 / sqrt(p.eta);
    measurement = sqrt(p.gamma * p.eta);
    feedback = measurement + 2 * p.lambda * inv_sqrt_eta;
  }

  BlochVector<Scalar> drift_vector(const BlochVector<Scalar>& b) const {
    return drift.matrix * b + drift.offset;
  }

  BlochVector<Scalar> noise_vector(const BlochVector<Scalar>& b) const {
    const Scalar s = measurement, f = feedback;
    const Scalar x = b(0), y = b(1), z = b(2);
    return BlochVector<Scalar>(-s * x * x + f * z + s, -s * x * y, -f * x - s * x * z);
  }

  /// One Euler-Maruyama step.
  BlochVector<Scalar> step(const BlochVector<Scalar>& b, Scalar dt, Scalar dW) const {
    return b + drift_vector(b) * dt + noise_vector(b) * dW;
  }

  /// Integrated homodyne current over the step: sqrt(gamma) x dt + dW / sqrt(eta).
  Scalar photocurrent(const BlochVector<Scalar>& b, Scalar dt, Scalar dW) const {
    return sqrt_gamma * b(0) * dt + dW * inv_sqrt_eta;
  }
};

template <typename Scalar>
BlochVector<Scalar> noise_vector(const BlochVector<Scalar>& b, const SystemParams<Scalar>& p) {
  return SbeCoefficients<Scalar>(p).noise_vector(b);
}

template <typename Scalar>
BlochVector<Scalar> sbe_step(const BlochVector<Scalar>& b, const SystemParams<Scalar>& p, Scalar dt,
                             Scalar dW) {
  return SbeCoefficients<Scalar>(p).step(b, dt, dW);
}

template <typename Scalar>
Scalar photocurrent_increment(const BlochVector<Scalar>& b, const SystemParams<Scalar>& p, Scalar dt,
                              Scalar dW) {
  return SbeCoefficients<Scalar>(p).photocurrent(b, dt, dW);
}

}  // namespace qfb
