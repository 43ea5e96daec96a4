#include "qfb/feedback_design.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "qfb/errors.hpp"
#include "qfb/line_search.hpp"
#include "qfb/sbe.hpp"

namespace qfb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_efficiency(double gamma, double eta) {
  if (!(gamma > 0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be positive");
  if (!(eta > 0 && eta <= 1)) throw std::invalid_argument("eta must lie in (0, 1]");
}

struct Candidate {
  double alpha;
  Bloch3d steady_state;
};

/// Stationary state for the constrained driving; false when it points along theta + pi.
bool evaluate(double lambda, double theta, double gamma, double eta, Candidate& out) {
  out.alpha = alpha_constrained(lambda, theta, gamma, eta);
  out.steady_state = feedback_ss(Params{gamma, eta, out.alpha, lambda});
  const double along = out.steady_state(0) * std::sin(theta) + out.steady_state(2) * std::cos(theta);
  return along > 0;
}

double score(Objective objective, double lambda, double theta, double gamma, double eta) {
  Candidate c;
  try {
    if (!evaluate(lambda, theta, gamma, eta, c)) return -kInf;
  } catch (const DomainError&) {
    return -kInf;
  }
  if (objective == Objective::purity) return c.steady_state.squaredNorm();
  const SbeCoefficients<double> sbe(Params{gamma, eta, c.alpha, lambda});
  return -sbe.noise_vector(c.steady_state).squaredNorm();
}

FeedbackDesign finish(Objective objective, double lambda, double theta, double gamma, double eta) {
  FeedbackDesign d;
  d.requested_theta = theta;
  d.theta = theta;
  d.gamma = gamma;
  d.eta = eta;
  d.objective = objective;
  d.lambda_opt = lambda;
  d.alpha_opt = alpha_constrained(lambda, theta, gamma, eta);
  d.steady_state = feedback_ss(d.params());
  d.r_squared = purity(d.steady_state).r_squared;
  d.objective_value = objective == Objective::purity
                          ? d.r_squared
                          : SbeCoefficients<double>(d.params()).noise_vector(d.steady_state).squaredNorm();
  return d;
}

FeedbackDesign optimize_off_equator(Objective objective, double theta, double gamma, double eta,
                                    const SearchConfig& cfg) {
  const double sg = std::sqrt(gamma);
  auto f = [&](double lambda) { return score(objective, lambda, theta, gamma, eta); };

  GridGoldenOptions opt{cfg.grid_points, cfg.tolerance * sg, cfg.tie_tolerance};
  ScalarMaximum best = grid_golden_maximize(f, -sg, 0.0, opt);

  bool outside = false;
  if (cfg.margin > 0 && cfg.margin_points >= 2) {
    GridGoldenOptions probe{cfg.margin_points, cfg.tolerance * sg, cfg.tie_tolerance};
    for (const auto& [lo, hi] : {std::pair{-(1 + cfg.margin) * sg, -sg}, std::pair{0.0, cfg.margin * sg}}) {
      const ScalarMaximum m = grid_golden_maximize(f, lo, hi, probe);
      if (m.value > best.value + cfg.tie_tolerance) {
        best = m;
        outside = true;
      }
    }
  }
  if (best.value == -kInf) {
    throw DomainError(DomainError::Kind::unreachable_direction,
                      "no feedback gain in the search interval reaches this direction");
  }
  FeedbackDesign d = finish(objective, best.argmax, theta, gamma, eta);
  d.outside_nominal = outside;
  return d;
}

bool better(const FeedbackDesign& a, const FeedbackDesign& b) {
  return a.objective == Objective::purity ? a.objective_value > b.objective_value
                                          : a.objective_value < b.objective_value;
}

FeedbackDesign optimize(Objective objective, double theta, double gamma, double eta,
                        const SearchConfig& cfg) {
  require_efficiency(gamma, eta);
  if (!on_equator(theta, cfg.equator_threshold)) {
    return optimize_off_equator(objective, theta, gamma, eta, cfg);
  }
  // Both neighbours of the equator; the lower-hemisphere side wins ties.
  const double away = std::copysign(cfg.equator_offset, theta);
  FeedbackDesign lower = optimize_off_equator(objective, theta + away, gamma, eta, cfg);
  FeedbackDesign upper = optimize_off_equator(objective, theta - away, gamma, eta, cfg);
  FeedbackDesign& pick = better(upper, lower) ? upper : lower;
  pick.requested_theta = theta;
  pick.near_equator = true;
  return pick;
}

}  // namespace

const char* to_string(Objective o) { return o == Objective::purity ? "purity" : "noise"; }

Objective parse_objective(const std::string& s) {
  if (s == "purity") return Objective::purity;
  if (s == "noise") return Objective::noise;
  throw std::invalid_argument("objective must be 'purity' or 'noise'");
}

bool on_equator(double theta, double threshold) { return std::abs(std::cos(theta)) < threshold; }

double alpha_constrained(double lambda, double theta, double gamma, double eta) {
  require_efficiency(gamma, eta);
  if (on_equator(theta)) {
    throw DomainError(DomainError::Kind::singular_direction,
                      "driving diverges for an equatorial target direction");
  }
  const double sg = std::sqrt(gamma);
  if (std::abs(gamma + 2 * sg * lambda) <= 1e-12 * gamma) {
    throw DomainError(DomainError::Kind::singular_denominator,
                      "lambda = -sqrt(gamma)/2 leaves only the maximally mixed steady state");
  }
  // The factor (sqrt(gamma) + 2 lambda) of the z numerator cancels against
  // (gamma + 2 sqrt(gamma) lambda) of the x numerator.
  const double q = gamma * eta + 4 * sg * eta * lambda + 4 * lambda * lambda;
  return q * std::tan(theta) / (4 * eta);
}

double noise_norm(double lambda, double theta, double gamma, double eta) {
  const double alpha = alpha_constrained(lambda, theta, gamma, eta);
  const Params p{gamma, eta, alpha, lambda};
  return SbeCoefficients<double>(p).noise_vector(feedback_ss(p)).squaredNorm();
}

FeedbackDesign optimize_purity(double theta, double gamma, double eta, const SearchConfig& cfg) {
  return optimize(Objective::purity, theta, gamma, eta, cfg);
}

FeedbackDesign optimize_noise(double theta, double gamma, double eta, const SearchConfig& cfg) {
  return optimize(Objective::noise, theta, gamma, eta, cfg);
}

FeedbackDesign design_eta1(double theta, double gamma) {
  FeedbackDesign d;
  d.requested_theta = d.theta = theta;
  d.gamma = gamma;
  d.eta = 1;
  d.lambda_opt = lambda_eta1(theta, gamma);
  d.alpha_opt = alpha_eta1(theta, gamma);
  d.steady_state = feedback_ss(d.params());
  d.r_squared = d.objective_value = d.steady_state.squaredNorm();
  return d;
}

FeedbackDesign driving_only_design(double theta, double gamma, const SearchConfig& cfg) {
  if (!(gamma > 0)) throw std::invalid_argument("gamma must be positive");
  FeedbackDesign d;
  d.requested_theta = theta;
  d.gamma = gamma;
  d.eta = 0;
  if (on_equator(theta, cfg.equator_threshold)) {
    theta += std::copysign(cfg.equator_offset, theta);
    d.near_equator = true;
  }
  d.theta = theta;
  if (std::cos(theta) >= 0) {
    throw DomainError(DomainError::Kind::unreachable_direction,
                      "driving alone only reaches the lower hemisphere");
  }
  d.alpha_opt = gamma * std::tan(theta) / 4;
  d.steady_state = driving_only_ss(gamma, d.alpha_opt);
  d.r_squared = d.objective_value = d.steady_state.squaredNorm();
  return d;
}

FeedbackDesign design(double theta, double gamma, double eta, Objective objective,
                      const SearchConfig& cfg) {
  if (eta == 0) {
    FeedbackDesign d = driving_only_design(theta, gamma, cfg);
    d.objective = objective;
    if (objective == Objective::noise) d.objective_value = kNaN;
    return d;
  }
  if (eta == 1 && !on_equator(theta, cfg.equator_threshold) && gamma > 0) {
    FeedbackDesign d = design_eta1(theta, gamma);
    d.objective = objective;
    if (objective == Objective::noise) {
      d.objective_value = SbeCoefficients<double>(d.params()).noise_vector(d.steady_state).squaredNorm();
    }
    return d;
  }
  return optimize(objective, theta, gamma, eta, cfg);
}

std::vector<double> locus_theta_grid(std::size_t n) {
  if (n == 0) throw std::invalid_argument("theta grid needs at least one point");
  std::vector<double> grid(n);
  const double h = 2 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) grid[k] = -std::numbers::pi + (static_cast<double>(k) + 0.5) * h;
  return grid;
}

LocusTable build_locus(double eta, double gamma, std::span<const double> theta_grid,
                       Objective objective, const SearchConfig& cfg) {
  if (!(gamma > 0)) throw std::invalid_argument("gamma must be positive");
  if (!(eta >= 0 && eta <= 1)) throw std::invalid_argument("eta must lie in [0, 1]");
  for (std::size_t i = 1; i < theta_grid.size(); ++i) {
    if (!(theta_grid[i] > theta_grid[i - 1])) throw std::invalid_argument("theta grid must increase");
  }
  LocusTable table{eta, gamma, objective, {}};
  table.rows.reserve(theta_grid.size());
  for (const double theta : theta_grid) {
    LocusRow row;
    row.theta = theta;
    try {
      const FeedbackDesign d = design(theta, gamma, eta, objective, cfg);
      row.lambda_opt = d.lambda_opt;
      row.alpha_opt = d.alpha_opt;
      row.x_ss = d.steady_state(0);
      row.z_ss = d.steady_state(2);
      row.r_squared = d.r_squared;
      row.near_equator = d.near_equator;
      row.outside_nominal = d.outside_nominal;
    } catch (const std::exception& e) {
      row.lambda_opt = row.alpha_opt = row.x_ss = row.z_ss = row.r_squared = kNaN;
      row.error = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace qfb
