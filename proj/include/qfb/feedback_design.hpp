#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qfb/bloch.hpp"
#include "qfb/steady_state.hpp"

namespace qfb {

enum class Objective { purity, noise };

const char* to_string(Objective o);
Objective parse_objective(const std::string& s);

/// Feedback gain that stabilizes the pure state at angle theta with perfect detection.
template <typename Scalar>
Scalar lambda_eta1(Scalar theta, Scalar gamma) {
  using std::cos;
  using std::sqrt;
  return -sqrt(gamma) / 2 * (1 + cos(theta));
}

/// Driving amplitude paired with lambda_eta1.
template <typename Scalar>
Scalar alpha_eta1(Scalar theta, Scalar gamma) {
  using std::cos;
  using std::sin;
  return gamma / 4 * sin(theta) * cos(theta);
}

/// Driving that points the stationary state of (gamma, eta, alpha, lambda) along theta,
/// i.e. x_ss / z_ss = tan(theta). Throws DomainError on the equator and at
/// lambda = -sqrt(gamma)/2, where the stationary state collapses to the origin.
double alpha_constrained(double lambda, double theta, double gamma, double eta);

/// Squared norm of the conditioned-dynamics noise vector at the stationary state
/// reached with alpha_constrained(lambda, ...).
double noise_norm(double lambda, double theta, double gamma, double eta);

struct SearchConfig {
  std::size_t grid_points = 512;
  /// Extra probe beyond [-sqrt(gamma), 0], as a fraction of sqrt(gamma).
  double margin = 0.2;
  std::size_t margin_points = 64;
  /// Golden-section stop, as a fraction of sqrt(gamma).
  double tolerance = 1e-8;
  double tie_tolerance = 1e-12;
  /// Equatorial targets are replaced by theta +/- equator_offset.
  double equator_offset = 1e-3;
  /// |cos(theta)| below this counts as the equator.
  double equator_threshold = 1e-9;
};

struct FeedbackDesign {
  double requested_theta = 0;
  double theta = 0;  // angle actually designed for (differs only near the equator)
  double gamma = 1;
  double eta = 1;
  double lambda_opt = 0;
  double alpha_opt = 0;
  Bloch3d steady_state = Bloch3d::Zero();
  double r_squared = 0;
  Objective objective = Objective::purity;
  double objective_value = 0;
  bool near_equator = false;     // requested theta was on the equator
  bool outside_nominal = false;  // optimum lies in the margin beyond [-sqrt(gamma), 0]

  Params params() const { return {gamma, eta, alpha_opt, lambda_opt}; }
};

bool on_equator(double theta, double threshold = SearchConfig{}.equator_threshold);

FeedbackDesign optimize_purity(double theta, double gamma, double eta, const SearchConfig& cfg = {});
FeedbackDesign optimize_noise(double theta, double gamma, double eta, const SearchConfig& cfg = {});

/// Closed-form design for unit efficiency (steady state evaluated, not assumed).
FeedbackDesign design_eta1(double theta, double gamma);

/// eta = 0: no feedback, driving alone. Only lower-hemisphere directions are reachable.
FeedbackDesign driving_only_design(double theta, double gamma, const SearchConfig& cfg = {});

/// Dispatch used by the command line: eta = 0 forces lambda = 0, eta = 1 off the
/// equator uses the closed form (the optimum of both objectives), otherwise the
/// requested numerical objective.
FeedbackDesign design(double theta, double gamma, double eta, Objective objective,
                      const SearchConfig& cfg = {});

struct LocusRow {
  double theta = 0;
  double lambda_opt = 0;
  double alpha_opt = 0;
  double x_ss = 0;
  double z_ss = 0;
  double r_squared = 0;
  bool near_equator = false;
  bool outside_nominal = false;
  std::string error;  // empty on success
};

struct LocusTable {
  double eta = 1;
  double gamma = 1;
  Objective objective = Objective::purity;
  std::vector<LocusRow> rows;
};

/// n cell-centred angles covering (-pi, pi), strictly increasing.
std::vector<double> locus_theta_grid(std::size_t n);

LocusTable build_locus(double eta, double gamma, std::span<const double> theta_grid,
                       Objective objective, const SearchConfig& cfg = {});

}  // namespace qfb
