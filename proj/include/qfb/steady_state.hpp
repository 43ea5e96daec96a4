#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/LU>

#include "qfb/bloch.hpp"
#include "qfb/errors.hpp"

namespace qfb {

/// Physical configuration: decay rate, detector efficiency, driving amplitude
/// (half the Rabi frequency) and feedback gain on the homodyne current.
template <typename Scalar>
struct SystemParams {
  Scalar gamma{1};
  Scalar eta{1};
  Scalar alpha{0};
  Scalar lambda{0};
};

using Params = SystemParams<double>;

template <typename Scalar>
void validate(const SystemParams<Scalar>& p) {
  using std::isfinite;
  if (!(p.gamma > 0) || !isfinite(p.gamma)) throw std::invalid_argument("gamma must be positive");
  if (!(p.eta >= 0 && p.eta <= 1)) throw std::invalid_argument("eta must lie in [0, 1]");
  if (!isfinite(p.alpha) || !isfinite(p.lambda)) {
    throw std::invalid_argument("alpha and lambda must be finite");
  }
}

/// Stationary state of the driven, decaying atom without feedback. The sign of x
/// follows the drive term -i alpha [sigma_y, rho], which rotates z into +x for alpha < 0.
template <typename Scalar>
BlochVector<Scalar> driving_only_ss(Scalar gamma, Scalar alpha) {
  if (!(gamma > 0)) throw std::invalid_argument("gamma must be positive");
  const Scalar den = gamma * gamma + 8 * alpha * alpha;
  return BlochVector<Scalar>(-4 * alpha * gamma / den, 0, -gamma * gamma / den);
}

/// Affine generator of the ensemble-averaged Bloch equations, db/dt = matrix * b + offset.
template <typename Scalar>
struct DriftModel {
  Eigen::Matrix<Scalar, 3, 3> matrix;
  BlochVector<Scalar> offset;
  Scalar kappa;
};

/// kappa = lambda^2 / eta + lambda sqrt(gamma); zero when lambda = 0 regardless of eta.
template <typename Scalar>
Scalar feedback_rate(const SystemParams<Scalar>& p) {
  using std::sqrt;
  if (p.lambda == 0) return Scalar(0);
  if (p.eta == 0) {
    throw std::invalid_argument("feedback with eta = 0 is undefined; use lambda = 0");
  }
  return p.lambda * p.lambda / p.eta + p.lambda * sqrt(p.gamma);
}

template <typename Scalar>
DriftModel<Scalar> drift_model(const SystemParams<Scalar>& p) {
  using std::sqrt;
  validate(p);
  const Scalar kappa = feedback_rate(p);
  DriftModel<Scalar> d;
  d.kappa = kappa;
  d.matrix << -p.gamma / 2 - 2 * kappa, 0, 2 * p.alpha,
              0, -p.gamma / 2, 0,
              -2 * p.alpha, 0, -p.gamma - 2 * kappa;
  d.offset << 0, 0, -(2 * p.lambda * sqrt(p.gamma) + p.gamma);
  return d;
}

/// Closed-form stationary state with feedback. D is the common denominator; the
/// x numerator carries the same orientation as driving_only_ss so that lambda = 0
/// reduces to it for every eta.
template <typename Scalar>
BlochVector<Scalar> feedback_ss(const SystemParams<Scalar>& p) {
  using std::abs;
  using std::sqrt;
  validate(p);
  if (p.eta == 0 && p.lambda == 0) return driving_only_ss(p.gamma, p.alpha);
  feedback_rate(p);

  const Scalar g = p.gamma, e = p.eta, a = p.alpha, l = p.lambda;
  const Scalar sg = sqrt(g);
  const Scalar l2 = l * l;
  const Scalar den = g * g * e * e + 6 * g * sg * e * e * l + 2 * g * e * (3 + 4 * e) * l2 +
                     16 * sg * e * l2 * l + 8 * (a * a * e * e + l2 * l2);
  if (!(abs(den) >= Scalar(1e-14))) {
    throw DomainError(DomainError::Kind::degenerate_denominator,
                      "stationary-state denominator vanishes (eta = 0 requires lambda = 0)");
  }
  const Scalar x = -4 * a * e * e * (g + 2 * sg * l) / den;
  const Scalar z = -sg * e * (sg + 2 * l) * (g * e + 4 * sg * e * l + 4 * l2) / den;
  return BlochVector<Scalar>(x, 0, z);
}

/// Solves matrix * b + offset = 0 directly; independent of the closed form above.
template <typename Scalar>
BlochVector<Scalar> fixed_point(const DriftModel<Scalar>& d) {
  return d.matrix.fullPivLu().solve(-d.offset);
}

enum class Stability { stable, marginal, unstable };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::marginal: return "marginal";
    case Stability::unstable: return "unstable";
  }
  return "?";
}

template <typename Scalar>
struct StabilityReport {
  /// y eigenvalue first, then the x-z block pair in descending real part.
  std::array<std::complex<Scalar>, 3> eigenvalues;
  Stability classification;
};

template <typename Scalar>
Stability classify(const std::array<std::complex<Scalar>, 3>& ev, Scalar tol) {
  Scalar top = ev[0].real();
  for (const auto& v : ev) top = std::max(top, v.real());
  if (top < -tol) return Stability::stable;
  if (top <= tol) return Stability::marginal;
  return Stability::unstable;
}

/// Eigenvalues of the drift matrix. y decouples; the x-z block is solved from its
/// trace and determinant, taking the larger-magnitude root first and the other as
/// det / root to avoid cancellation.
template <typename Scalar>
StabilityReport<Scalar> stability_eigenvalues(const SystemParams<Scalar>& p,
                                              Scalar rel_tol = Scalar(1e-9)) {
  using std::abs;
  using std::sqrt;
  using C = std::complex<Scalar>;
  const auto d = drift_model(p);
  const auto& m = d.matrix;
  const Scalar mu = (m(0, 0) + m(2, 2)) / 2;
  const Scalar half_diff = (m(0, 0) - m(2, 2)) / 2;
  const Scalar disc = half_diff * half_diff + m(0, 2) * m(2, 0);
  const Scalar det = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);

  C hi, lo;
  if (disc >= 0) {
    const Scalar root = sqrt(disc);
    const Scalar big = mu >= 0 ? mu + root : mu - root;
    const Scalar other = big != 0 ? det / big : Scalar(0);
    hi = C(std::max(big, other));
    lo = C(std::min(big, other));
  } else {
    const Scalar w = sqrt(-disc);
    hi = C(mu, w);
    lo = C(mu, -w);
  }
  StabilityReport<Scalar> r;
  r.eigenvalues = {C(m(1, 1)), hi, lo};
  r.classification = classify(r.eigenvalues, rel_tol * p.gamma);
  return r;
}

namespace detail {

/// e^{M t} for a real 2x2 matrix via e^{mu t}[c(t) I + s(t)(M - mu I)], where c and s
/// are entire in the squared half-splitting, so repeated eigenvalues need no special case.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> expm2(const Eigen::Matrix<Scalar, 2, 2>& m, Scalar t) {
  using std::abs;
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::sin;
  using std::sinh;
  using std::sqrt;
  const Scalar mu = m.trace() / 2;
  const Scalar half_diff = (m(0, 0) - m(1, 1)) / 2;
  const Scalar d2 = half_diff * half_diff + m(0, 1) * m(1, 0);
  const Scalar z = d2 * t * t;
  Scalar c, s;
  if (abs(z) < Scalar(1e-4)) {
    c = 1 + z / 2 + z * z / 24;
    s = t * (1 + z / 6 + z * z / 120);
  } else if (d2 > 0) {
    const Scalar d = sqrt(d2);
    c = cosh(d * t);
    s = sinh(d * t) / d;
  } else {
    const Scalar w = sqrt(-d2);
    c = cos(w * t);
    s = sin(w * t) / w;
  }
  const Eigen::Matrix<Scalar, 2, 2> shifted = m - mu * Eigen::Matrix<Scalar, 2, 2>::Identity();
  return exp(mu * t) * (c * Eigen::Matrix<Scalar, 2, 2>::Identity() + s * shifted);
}

}  // namespace detail

/// Exact solution of db/dt = matrix * b + offset from b0. When the x-z block is
/// singular the offset vanishes too (only the eta = 1 equatorial design reaches it),
/// so the flow is then purely linear.
template <typename Scalar>
BlochVector<Scalar> deterministic_solution(const DriftModel<Scalar>& d,
                                           const BlochVector<Scalar>& b0, Scalar t) {
  using std::abs;
  using std::exp;
  Eigen::Matrix<Scalar, 2, 2> block;
  block << d.matrix(0, 0), d.matrix(0, 2), d.matrix(2, 0), d.matrix(2, 2);
  const Eigen::Matrix<Scalar, 2, 1> c(d.offset(0), d.offset(2));
  const Scalar scale = block.cwiseAbs().maxCoeff();
  Eigen::Matrix<Scalar, 2, 1> fixed = Eigen::Matrix<Scalar, 2, 1>::Zero();
  if (abs(block.determinant()) > Scalar(1e-13) * scale * scale) {
    fixed = block.partialPivLu().solve(-c);
  } else if (c.norm() > Scalar(1e-12) * (scale + 1)) {
    throw DomainError(DomainError::Kind::degenerate_denominator,
                      "singular drift with a non-zero offset has no bounded solution");
  }
  const Eigen::Matrix<Scalar, 2, 1> start(b0(0), b0(2));
  const Eigen::Matrix<Scalar, 2, 1> xz = fixed + detail::expm2(block, t) * (start - fixed);
  return BlochVector<Scalar>(xz(0), exp(d.matrix(1, 1) * t) * b0(1), xz(1));
}

}  // namespace qfb
