#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>

namespace qfb {

struct ScalarMaximum {
  double argmax = std::numeric_limits<double>::quiet_NaN();
  double value = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline double finite_or_floor(double v) {
  return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

/// Strictly better, or tied within `tie` and closer to zero.
inline bool prefer(const ScalarMaximum& cand, const ScalarMaximum& best, double tie) {
  if (cand.value > best.value + tie) return true;
  if (cand.value >= best.value - tie && std::abs(cand.argmax) < std::abs(best.argmax)) return true;
  return false;
}

}  // namespace detail

/// Golden-section maximization of a unimodal f on [lo, hi] until the bracket is
/// narrower than `tol`. NaN evaluations count as -inf.
template <class F>
ScalarMaximum golden_section_maximize(F&& f, double lo, double hi, double tol,
                                      int max_iterations = 500) {
  const double inv_phi = 1.0 / std::numbers::phi;
  double a = lo, b = hi;
  double u = b - inv_phi * (b - a);
  double v = a + inv_phi * (b - a);
  double fu = detail::finite_or_floor(f(u));
  double fv = detail::finite_or_floor(f(v));
  for (int it = 0; it < max_iterations && (b - a) > tol; ++it) {
    if (fu < fv) {
      a = u;
      u = v;
      fu = fv;
      v = a + inv_phi * (b - a);
      fv = detail::finite_or_floor(f(v));
    } else {
      b = v;
      v = u;
      fv = fu;
      u = b - inv_phi * (b - a);
      fu = detail::finite_or_floor(f(u));
    }
  }
  return fu >= fv ? ScalarMaximum{u, fu} : ScalarMaximum{v, fv};
}

struct GridGoldenOptions {
  std::size_t grid_points = 512;
  double tolerance = 1e-8;
  double tie_tolerance = 1e-12;
};

/// Dense scan over [lo, hi] to locate the global basin, then golden-section
/// refinement between the neighbours of the best grid point. Ties within
/// `tie_tolerance` resolve to the argument of smaller magnitude.
template <class F>
ScalarMaximum grid_golden_maximize(F&& f, double lo, double hi, const GridGoldenOptions& opt = {}) {
  const std::size_t n = opt.grid_points < 2 ? 2 : opt.grid_points;
  const double step = (hi - lo) / static_cast<double>(n - 1);
  ScalarMaximum best;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i + 1 == n ? hi : lo + step * static_cast<double>(i);
    const ScalarMaximum cand{x, detail::finite_or_floor(f(x))};
    if (std::isnan(best.argmax) || detail::prefer(cand, best, opt.tie_tolerance)) {
      best = cand;
      best_i = i;
    }
  }
  if (best.value == -std::numeric_limits<double>::infinity()) return best;

  const double a = best_i == 0 ? lo : lo + step * static_cast<double>(best_i - 1);
  const double b = best_i + 1 >= n ? hi : lo + step * static_cast<double>(best_i + 1);
  const ScalarMaximum refined = golden_section_maximize(f, a, b, opt.tolerance);
  return detail::prefer(refined, best, opt.tie_tolerance) ? refined : best;
}

}  // namespace qfb
