#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/LU>

namespace qfb {

/// Bloch vector (x, y, z) of a two-level atom, z = +1 being the excited state.
template <typename Scalar>
using BlochVector = Eigen::Matrix<Scalar, 3, 1>;

/// 2x2 state matrix in the ordered basis {|e>, |g>}.
template <typename Scalar>
using DensityMatrix = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

using Bloch3d = BlochVector<double>;
using Density2cd = DensityMatrix<double>;

/// Polar form of an x-z plane state: x = r sin(theta), z = r cos(theta).
template <typename Scalar>
struct PolarState {
  Scalar r{0};
  Scalar theta{0};
};

template <typename Scalar>
struct Purity {
  Scalar r_squared;
  Scalar trace_rho_squared;
};

namespace tolerance {
inline constexpr double bloch = 1e-9;
inline constexpr double out_of_plane = 1e-9;
inline constexpr double density = 1e-12;
}  // namespace tolerance

/// Pauli matrices for the lowering operator sigma = |g><e|:
/// sigma_x = sigma + sigma^dag, sigma_y = i sigma - i sigma^dag, sigma_z = [sigma^dag, sigma].
template <typename Scalar>
DensityMatrix<Scalar> pauli_x() {
  DensityMatrix<Scalar> m;
  m << 0, 1, 1, 0;
  return m;
}

template <typename Scalar>
DensityMatrix<Scalar> pauli_y() {
  using C = std::complex<Scalar>;
  DensityMatrix<Scalar> m;
  m << C(0), C(0, -1), C(0, 1), C(0);
  return m;
}

template <typename Scalar>
DensityMatrix<Scalar> pauli_z() {
  DensityMatrix<Scalar> m;
  m << 1, 0, 0, -1;
  return m;
}

template <typename Derived>
void check_bloch(const Eigen::MatrixBase<Derived>& b,
                 typename Derived::Scalar tol = typename Derived::Scalar(tolerance::bloch)) {
  using Scalar = typename Derived::Scalar;
  if (!b.allFinite() || b.squaredNorm() > (Scalar(1) + tol) * (Scalar(1) + tol)) {
    throw std::invalid_argument("Bloch vector lies outside the unit ball");
  }
}

template <typename Derived>
DensityMatrix<typename Derived::Scalar> bloch_to_rho(const Eigen::MatrixBase<Derived>& b) {
  using Scalar = typename Derived::Scalar;
  using C = std::complex<Scalar>;
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  check_bloch(b);
  const Scalar half(0.5);
  DensityMatrix<Scalar> rho;
  rho(0, 0) = C(half * (1 + b(2)), 0);
  rho(1, 1) = C(half * (1 - b(2)), 0);
  rho(0, 1) = C(half * b(0), -half * b(1));
  rho(1, 0) = std::conj(rho(0, 1));
  return rho;
}

/// Hermiticity, unit trace and a non-negative determinant, all to within `tol`.
template <typename Scalar>
bool is_density_matrix(const DensityMatrix<Scalar>& rho, Scalar tol = Scalar(tolerance::density)) {
  using std::abs;
  if (!rho.allFinite()) return false;
  if (abs(rho(1, 0) - std::conj(rho(0, 1))) > tol) return false;
  if (abs(rho(0, 0).imag()) > tol || abs(rho(1, 1).imag()) > tol) return false;
  if (abs(rho.trace() - std::complex<Scalar>(1)) > tol) return false;
  return rho.determinant().real() >= -tol;
}

template <typename Scalar>
BlochVector<Scalar> rho_to_bloch(const DensityMatrix<Scalar>& rho) {
  if (!is_density_matrix(rho)) {
    throw std::invalid_argument("matrix is not a valid two-level state");
  }
  return BlochVector<Scalar>(2 * rho(0, 1).real(), -2 * rho(0, 1).imag(),
                             (rho(0, 0) - rho(1, 1)).real());
}

template <typename Derived>
Purity<typename Derived::Scalar> purity(const Eigen::MatrixBase<Derived>& b) {
  const auto r2 = b.squaredNorm();
  return {r2, (1 + r2) / 2};
}

template <typename Scalar>
BlochVector<Scalar> polar_to_cartesian(const PolarState<Scalar>& p) {
  using std::cos;
  using std::sin;
  if (!(p.r >= 0) || p.r > 1 + Scalar(tolerance::bloch)) {
    throw std::invalid_argument("polar radius must lie in [0, 1]");
  }
  return BlochVector<Scalar>(p.r * sin(p.theta), 0, p.r * cos(p.theta));
}

/// theta = atan2(x, z), measured from +z toward +x, in (-pi, pi]. The origin maps to theta = 0.
template <typename Derived>
PolarState<typename Derived::Scalar> cartesian_to_polar(const Eigen::MatrixBase<Derived>& b) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::atan2;
  using std::hypot;
  if (abs(b(1)) > Scalar(tolerance::out_of_plane)) {
    throw std::invalid_argument("state is not in the x-z plane");
  }
  const Scalar r = hypot(b(0), b(2));
  if (r == 0) return {Scalar(0), Scalar(0)};
  Scalar theta = atan2(b(0), b(2));
  if (theta == -std::numbers::pi_v<Scalar>) theta = std::numbers::pi_v<Scalar>;
  return {r, theta};
}

}  // namespace qfb
