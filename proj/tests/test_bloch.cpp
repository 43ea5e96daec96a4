#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "qfb/bloch.hpp"

using namespace qfb;
using C = std::complex<double>;
constexpr double pi = std::numbers::pi;

namespace {

Bloch3d random_in_ball(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  for (;;) {
    Bloch3d b(u(rng), u(rng), u(rng));
    if (b.squaredNorm() <= 1) return b;
  }
}

void check_close(const C& a, const C& b, double tol = 1e-15) {
  CHECK(std::abs(a - b) <= tol);
}

}  // namespace

TEST_SUITE("bloch") {
  TEST_CASE("basis states map to diagonal projectors") {
    const auto ground = bloch_to_rho(Bloch3d(0, 0, -1));
    check_close(ground(0, 0), 0);
    check_close(ground(1, 1), 1);
    check_close(ground(0, 1), 0);

    const auto excited = bloch_to_rho(Bloch3d(0, 0, 1));
    check_close(excited(0, 0), 1);
    check_close(excited(1, 1), 0);
    check_close(excited(1, 0), 0);
  }

  TEST_CASE("x eigenstate has every entry one half") {
    const auto rho = bloch_to_rho(Bloch3d(1, 0, 0));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) check_close(rho(i, j), 0.5);
  }

  TEST_CASE("rho agrees with the Pauli expansion") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 200; ++k) {
      const Bloch3d b = random_in_ball(rng);
      const Density2cd expected =
          0.5 * (Density2cd::Identity() + b(0) * pauli_x<double>() + b(1) * pauli_y<double>() + b(2) * pauli_z<double>());
      CHECK((bloch_to_rho(b) - expected).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }

  TEST_CASE("Pauli matrices follow from the lowering operator") {
    Density2cd lower = Density2cd::Zero();
    lower(1, 0) = 1;  // |g><e| with |e> first
    const Density2cd raise = lower.adjoint();
    CHECK((pauli_x<double>() - (lower + raise)).norm() == 0);
    CHECK((pauli_y<double>() - (C(0, 1) * lower - C(0, 1) * raise)).norm() == 0);
    CHECK((pauli_z<double>() - (raise * lower - lower * raise)).norm() == 0);
  }

  TEST_CASE("rejects vectors outside the ball") {
    CHECK_THROWS_AS(bloch_to_rho(Bloch3d(1, 0.1, 0)), std::invalid_argument);
    CHECK_NOTHROW(bloch_to_rho(Bloch3d(1 + 1e-10, 0, 0)));
  }

  TEST_CASE("rho_to_bloch inverts known states") {
    Density2cd ground = Density2cd::Zero();
    ground(1, 1) = 1;
    CHECK((rho_to_bloch(ground) - Bloch3d(0, 0, -1)).norm() == 0);

    const Density2cd mixed = 0.5 * Density2cd::Identity();
    CHECK(rho_to_bloch(mixed).norm() == 0);

    const Bloch3d b(0.6, 0, 0.8);
    CHECK((rho_to_bloch(bloch_to_rho(b)) - b).norm() <= 1e-15);
  }

  TEST_CASE("rho_to_bloch rejects invalid matrices") {
    Density2cd not_hermitian = 0.5 * Density2cd::Identity();
    not_hermitian(0, 1) = 0.1;
    CHECK_THROWS_AS(rho_to_bloch(not_hermitian), std::invalid_argument);

    Density2cd bad_trace = Density2cd::Identity();
    CHECK_THROWS_AS(rho_to_bloch(bad_trace), std::invalid_argument);

    Density2cd negative = Density2cd::Zero();
    negative(0, 0) = 1.5;
    negative(1, 1) = -0.5;
    CHECK_THROWS_AS(rho_to_bloch(negative), std::invalid_argument);
  }

  TEST_CASE("round trip over random states") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 1000; ++k) {
      const Bloch3d b = random_in_ball(rng);
      const Density2cd rho = bloch_to_rho(b);
      CHECK(is_density_matrix(rho));
      CHECK((rho_to_bloch(rho) - b).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  TEST_CASE("purity values") {
    auto p = purity(Bloch3d(0, 0, 0));
    CHECK(p.r_squared == 0);
    CHECK(p.trace_rho_squared == 0.5);
    p = purity(Bloch3d(0.6, 0, 0.8));
    CHECK(p.r_squared == doctest::Approx(1).epsilon(1e-15));
    CHECK(p.trace_rho_squared == doctest::Approx(1).epsilon(1e-15));
    p = purity(Bloch3d(0.5, 0, 0));
    CHECK(p.r_squared == 0.25);
    CHECK(p.trace_rho_squared == 0.625);
  }

  TEST_CASE("purity matches the trace of rho squared") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 1000; ++k) {
      const Bloch3d b = random_in_ball(rng);
      const Density2cd rho = bloch_to_rho(b);
      const double direct = (rho * rho).trace().real();
      CHECK(std::abs(purity(b).trace_rho_squared - direct) <= 1e-12);
    }
  }

  TEST_CASE("polar conversions") {
    CHECK((polar_to_cartesian(PolarState<double>{1, pi}) - Bloch3d(0, 0, -1)).norm() <= 1e-15);
    CHECK((polar_to_cartesian(PolarState<double>{1, pi / 2}) - Bloch3d(1, 0, 0)).norm() <= 1e-15);

    const auto p = cartesian_to_polar(Bloch3d(0.6, 0, 0.8));
    CHECK(p.r == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.theta == doctest::Approx(std::asin(0.6)).epsilon(1e-15));
    CHECK(p.theta == doctest::Approx(0.6435).epsilon(1e-4));
  }

  TEST_CASE("polar edge cases") {
    const auto origin = cartesian_to_polar(Bloch3d(0, 0, 0));
    CHECK(origin.r == 0);
    CHECK(origin.theta == 0);
    CHECK(cartesian_to_polar(Bloch3d(-0.0, 0, -1)).theta == pi);
    CHECK_THROWS_AS(cartesian_to_polar(Bloch3d(0.5, 1e-6, 0.5)), std::invalid_argument);
    CHECK_THROWS_AS(polar_to_cartesian(PolarState<double>{-0.1, 0}), std::invalid_argument);
  }

  TEST_CASE("polar round trip") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> r(1e-6, 1), th(-pi, pi);
    for (int k = 0; k < 1000; ++k) {
      PolarState<double> p{r(rng), th(rng)};
      if (p.theta == -pi) p.theta = pi;
      const auto back = cartesian_to_polar(polar_to_cartesian(p));
      CHECK(std::abs(back.r - p.r) <= 1e-9);
      CHECK(std::abs(back.theta - p.theta) <= 1e-9);
    }
  }

  TEST_CASE("works for long double") {
    const BlochVector<long double> b(0.6L, 0, 0.8L);
    const auto rho = bloch_to_rho(b);
    CHECK(std::abs(rho(0, 1).real() - 0.3L) < 1e-18L);
  }
}
