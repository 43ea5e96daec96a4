#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qfb/cli.hpp"
#include "qfb/feedback_design.hpp"
#include "qfb/sbe.hpp"
#include "qfb/sde.hpp"
#include "qfb/steady_state.hpp"

using namespace qfb;
namespace fs = std::filesystem;
constexpr double pi = std::numbers::pi;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Params eta1_design(double theta, double gamma = 1) {
  return {gamma, 1.0, alpha_eta1(theta, gamma), lambda_eta1(theta, gamma)};
}

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("QFB_TEST_TMP");
  const fs::path root = env != nullptr ? fs::path(env) : fs::temp_directory_path() / "qfb_acceptance";
  const fs::path dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 1. Optimizer against the unit-efficiency closed form.
Outcome closed_form_identity() {
  double worst_lambda = 0, worst_alpha = 0, worst_state = 0;
  for (int k = 0; k < 100; ++k) {
    const double theta = -pi + (k + 0.5) * 2 * pi / 100;
    const auto d = optimize_purity(theta, 1.0, 1.0);
    worst_lambda = std::max(worst_lambda, std::abs(d.lambda_opt - (-0.5 * (1 + std::cos(theta)))));
    worst_alpha = std::max(worst_alpha, std::abs(d.alpha_opt - 0.25 * std::sin(theta) * std::cos(theta)));
    const Bloch3d b = feedback_ss(eta1_design(theta));
    worst_state = std::max(worst_state, (b - Bloch3d(std::sin(theta), 0, std::cos(theta))).cwiseAbs().maxCoeff());
  }
  return {worst_lambda <= 1e-6 && worst_alpha <= 1e-6 && worst_state <= 1e-9,
          "max|dlambda| " + fmt("%.2e", worst_lambda) + "  max|dalpha| " + fmt("%.2e", worst_alpha) +
              "  max|b - (sin,0,cos)| " + fmt("%.2e", worst_state)};
}

// 2. Eigenvalues of the unit-efficiency designs.
Outcome eigenvalue_theorem() {
  std::vector<double> grid;
  for (int k = 0; k <= 62; ++k) grid.push_back(-pi + 0.1 * k);
  grid.push_back(pi / 2);
  grid.push_back(-pi / 2);
  Outcome o;
  double worst = 0;
  int misclassified = 0;
  for (const double gamma : {1.0, 2.0}) {
    for (const double theta : grid) {
      const auto r = stability_eigenvalues(eta1_design(theta, gamma));
      std::vector<double> got, want{-gamma / 2, -gamma / 2, -gamma * std::cos(theta) * std::cos(theta)};
      for (const auto& e : r.eigenvalues) {
        got.push_back(e.real());
        worst = std::max(worst, std::abs(e.imag()));
      }
      std::sort(got.begin(), got.end());
      std::sort(want.begin(), want.end());
      for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
      const bool equator = std::abs(std::cos(theta)) < 1e-9;
      const Stability expected = equator ? Stability::marginal : Stability::stable;
      if (r.classification != expected) ++misclassified;
    }
  }
  o.pass = worst <= 1e-9 && misclassified == 0;
  o.detail = "max eigenvalue error " + fmt("%.2e", worst) + "  misclassified " + std::to_string(misclassified) + " of " +
             std::to_string(2 * grid.size());
  return o;
}

// 3. Zero feedback gain reduces to the driving-only state.
Outcome zero_gain_reduction() {
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      for (int k = 0; k < 10; ++k) {
        const double gamma = 0.1 + 0.5 * i, eta = 0.1 * (j + 1), alpha = -2 + 4.0 * k / 9;
        const Bloch3d b = feedback_ss(Params{gamma, eta, alpha, 0.0});
        const double den = gamma * gamma + 8 * alpha * alpha;
        const Bloch3d free(-4 * alpha * gamma / den, 0, -gamma * gamma / den);
        worst = std::max(worst, (b - free).cwiseAbs().maxCoeff());
      }
    }
  }
  return {worst <= 1e-12, "max deviation " + fmt("%.2e", worst) + " over 1000 (gamma, eta, alpha)"};
}

// 4. Nested loci, equatorial collapse and the upper/lower asymmetry.
Outcome locus_properties() {
  const auto grid = locus_theta_grid(180);
  const std::vector<double> etas{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<LocusTable> tables;
  for (const double eta : etas) tables.push_back(build_locus(eta, 1.0, grid, Objective::purity));

  int failed_rows = 0, monotone = 0, equator = 0, mirror = 0, equator_rows = 0, mirror_pairs = 0;
  double min_step = 1e300, max_equator_r2 = 0;
  for (std::size_t e = 0; e < etas.size(); ++e) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& row = tables[e].rows[i];
      if (!row.error.empty()) ++failed_rows;
      if (e > 0) {
        const double step = row.r_squared - tables[e - 1].rows[i].r_squared;
        min_step = std::min(min_step, step);
        if (!(step >= -1e-12)) ++monotone;
      }
      const double theta = grid[i];
      if (etas[e] <= 0.8 && std::abs(std::abs(theta) - pi / 2) < 0.05) {
        ++equator_rows;
        max_equator_r2 = std::max(max_equator_r2, row.r_squared);
        if (!(row.r_squared < 0.05)) ++equator;
      }
      if (etas[e] < 1 && std::cos(theta) > 0) {
        // theta_k and pi - theta_k are both cell centres of the grid.
        const double m = std::remainder(pi - theta, 2 * pi);
        const auto j = static_cast<std::size_t>(std::lround((m + pi) / (2 * pi / 180) - 0.5));
        if (std::abs(grid[j] - m) > 1e-9) return {false, "mirror angle missing from grid"};
        ++mirror_pairs;
        if (!(row.r_squared <= tables[e].rows[j].r_squared + 1e-12)) ++mirror;
      }
    }
  }
  Outcome o;
  o.pass = failed_rows == 0 && monotone == 0 && equator == 0 && mirror == 0 && equator_rows > 0;
  o.detail = "monotonicity violations " + std::to_string(monotone) + " (min step " + fmt("%.2e", min_step) +
             ")  equator rows " + std::to_string(equator_rows) + " max r2 " + fmt("%.4f", max_equator_r2) +
             "  mirror violations " + std::to_string(mirror) + "/" + std::to_string(mirror_pairs) +
             "  failed rows " + std::to_string(failed_rows);
  return o;
}

// 5. Locking of unit-efficiency trajectories onto the designed pure state.
Outcome trajectory_locking() {
  SimConfig cfg;
  cfg.params = eta1_design(pi / 6);
  cfg.dt = 1e-3;
  cfg.t_final = 10;
  cfg.record_every = 1000000;
  const Bloch3d target(0.5, 0, std::sqrt(3.0) / 2);
  int far = 0, impure = 0, escaped = 0;
  std::vector<double> dist, defect;
  for (std::uint64_t s = 1; s <= 100; ++s) {
    cfg.seed = s;
    try {
      const auto t = simulate(cfg);
      const double d = (t.states.back() - target).norm();
      dist.push_back(d);
      defect.push_back(t.max_purity_defect);
      if (!(d < 1e-2)) ++far;
      if (!(t.max_purity_defect < 1e-2)) ++impure;
    } catch (const ContainmentError&) {
      ++escaped;
    }
  }
  std::sort(dist.begin(), dist.end());
  std::sort(defect.begin(), defect.end());
  Outcome o;
  o.pass = far == 0 && impure == 0 && escaped == 0;
  o.detail = "final distance >= 1e-2: " + std::to_string(far) + "/100 (median " + fmt("%.4f", dist[dist.size() / 2]) +
             ", max " + fmt("%.4f", dist.back()) + ")  max|r2-1| >= 1e-2: " + std::to_string(impure) +
             "/100 (median " + fmt("%.4f", defect[defect.size() / 2]) + ")  containment failures " +
             std::to_string(escaped);
  return o;
}

// 6. Equatorial design: martingale mean, growing second moment, endpoint split.
Outcome equator_bimodality() {
  const std::size_t n = 10000;
  SimConfig cfg;
  cfg.params = equator_params(1.0);
  cfg.dt = 1e-3;
  cfg.t_final = 20;
  cfg.seed = 2024;
  cfg.n_trajectories = n;
  cfg.record_every = 1000;
  const auto ground = equator_diagnostic(cfg);

  const double sigma_half = std::sqrt(0.25 / n);
  const bool split = std::abs(ground.fraction_plus - 0.5) <= 4 * sigma_half &&
                     std::abs(ground.fraction_minus - 0.5) <= 4 * sigma_half;
  int mean_bad = 0, second_bad = 0;
  for (std::size_t i = 1; i < ground.times.size(); ++i) {
    if (!(std::abs(ground.mean_x[i]) <= 4 * ground.stderr_x[i])) ++mean_bad;
  }
  for (std::size_t i = 0; i < ground.x2_increment.size(); ++i) {
    if (!(ground.x2_increment[i] >= -4 * ground.x2_increment_stderr[i])) ++second_bad;
  }

  cfg.initial_state = Bloch3d(0.9, 0, 0);
  cfg.seed = 2025;
  const auto near = equator_diagnostic(cfg);
  const double sigma_tail = std::sqrt(0.05 * 0.95 / n);
  const bool tail = std::abs(near.fraction_minus - 0.05) <= 4 * sigma_tail;

  Outcome o;
  o.pass = split && mean_bad == 0 && second_bad == 0 && tail;
  o.detail = "ground start +1/-1/undecided " + fmt("%.4f", ground.fraction_plus) + "/" +
             fmt("%.4f", ground.fraction_minus) + "/" + fmt("%.4f", ground.fraction_undecided) +
             "  mean-x violations " + std::to_string(mean_bad) + "  E[x^2] decreases " + std::to_string(second_bad) +
             "  x0=0.9 fraction at -1 " + fmt("%.4f", near.fraction_minus) + " (4 sigma " +
             fmt("%.4f", 4 * sigma_tail) + ")  T=20";
  return o;
}

// 7. Ensemble mean against the exact averaged dynamics.
Outcome ensemble_equivalence() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> g(0.5, 2), e(0.1, 1), a(-1, 1), l(-1, 1);
  Outcome o;
  double worst = 0;
  for (int set = 0; set < 5; ++set) {
    const double gamma = g(rng), eta = e(rng), alpha = a(rng), lambda = l(rng) * std::sqrt(gamma);
    SimConfig cfg;
    cfg.params = Params{gamma, eta, alpha, lambda};
    // Step well below both the fastest drift rate and the noise scale of the set.
    const auto sbe = SbeCoefficients<double>(cfg.params);
    const double rate = std::max({gamma, sbe.drift.matrix.cwiseAbs().maxCoeff(), sbe.feedback * sbe.feedback,
                                  sbe.measurement * sbe.measurement});
    cfg.dt = 1e-3 / rate;
    cfg.t_final = 4 / gamma;
    cfg.seed = 500 + set;
    cfg.n_trajectories = 10000;
    cfg.record_every = std::max<std::size_t>(1, step_count(cfg) / 20);
    const auto stats = ensemble(cfg);
    const auto rep = compare_with_deterministic(stats, cfg, 4.0);
    worst = std::max(worst, rep.worst_z);
    if (!rep.pass || rep.times.size() < 20) o.pass = false;
    o.detail += "[g=" + fmt("%.3f", gamma) + " eta=" + fmt("%.3f", eta) + " a=" + fmt("%.3f", alpha) +
                " l=" + fmt("%.3f", lambda) + " z=" + fmt("%.2f", rep.worst_z) + "] ";
  }
  o.detail += "worst z " + fmt("%.2f", worst);
  return o;
}

// 8. Wandering about the stationary state at imperfect efficiency.
Outcome steady_wandering() {
  const auto d = optimize_purity(pi / 6, 1.0, 0.8);
  SimConfig cfg;
  cfg.params = d.params();
  cfg.dt = 1e-3;
  cfg.t_final = 120;
  cfg.seed = 8;
  cfg.record_every = 10;
  const auto traj = simulate(cfg);
  const auto avg = time_average(traj, 20, 120, 10);
  double worst = 0;
  bool ok = true;
  for (int c = 0; c < 3; ++c) {
    const double diff = std::abs(avg.mean(c) - d.steady_state(c));
    if (avg.stderr_mean(c) > 0) {
      worst = std::max(worst, diff / avg.stderr_mean(c));
      if (!(diff <= 4 * avg.stderr_mean(c))) ok = false;
    } else if (!(diff <= 1e-12)) {
      ok = false;
    }
  }
  Outcome o;
  o.pass = ok && avg.r_squared_variance > 1e-4;
  o.detail = "time average (" + fmt("%.4f", avg.mean(0)) + ", " + fmt("%.1e", avg.mean(1)) + ", " +
             fmt("%.4f", avg.mean(2)) + ") vs (" + fmt("%.4f", d.steady_state(0)) + ", 0, " +
             fmt("%.4f", d.steady_state(2)) + ")  worst z " + fmt("%.2f", worst) + "  var(r2) " +
             fmt("%.4f", avg.r_squared_variance);
  return o;
}

// 9. Agreement of the purity and noise objectives.
Outcome optimizer_agreement() {
  // Regression pins of the observed max |lambda_noise - lambda_purity|. Both sit at the
  // resolution of the line search, so the pin tolerance is that resolution.
  const std::vector<std::pair<double, double>> pinned{{0.4, 1.578038e-07}, {0.8, 3.094137e-08}};
  constexpr double pin_tolerance = 1e-7;
  const auto grid = locus_theta_grid(180);
  Outcome o;
  for (const auto& [eta, pin] : pinned) {
    const auto p = build_locus(eta, 1.0, grid, Objective::purity);
    const auto n = build_locus(eta, 1.0, grid, Objective::noise);
    double gap = 0, where = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!p.rows[i].error.empty() || !n.rows[i].error.empty()) {
        o.pass = false;
        continue;
      }
      const double g = std::abs(p.rows[i].lambda_opt - n.rows[i].lambda_opt);
      if (g > gap) {
        gap = g;
        where = grid[i];
      }
    }
    if (!(std::abs(gap - pin) <= pin_tolerance)) o.pass = false;
    o.detail += "eta=" + fmt("%.1f", eta) + " max|dlambda| " + fmt("%.6e", gap) + " at theta " + fmt("%.4f", where) +
                " (pinned " + fmt("%.6e", pin) + ")  ";
  }
  return o;
}

// 10. Manifest replays reproduce every stochastic output bit-exactly.
Outcome manifest_reproducibility() {
  const auto dir = scratch("criterion_10");
  std::ostringstream out, err;
  Outcome o;
  struct Case {
    std::vector<std::string> args;
    fs::path output;
  };
  const std::vector<Case> cases{
      {{"simulate", "--theta", "pi/6", "--eta", "0.8", "--t-final", "5", "--seed", "42", "--out",
        (dir / "traj.csv").string()},
       dir / "traj.csv"},
      {{"simulate", "--theta", "pi/2", "--t-final", "5", "--seed", "7", "--record-every", "10", "--out",
        (dir / "equator.csv").string()},
       dir / "equator.csv"},
      {{"ensemble", "--theta", "pi/3", "--eta", "0.6", "--t-final", "2", "--n-trajectories", "600", "--seed", "9",
        "--out", (dir / "ens.csv").string()},
       dir / "ens.csv"},
  };
  int identical = 0;
  for (const auto& c : cases) {
    if (cli::run_cli(c.args, out, err) != cli::ok) {
      o.pass = false;
      o.detail += "run failed: " + err.str();
      continue;
    }
    auto replay = c.output;
    replay += ".replay";
    const int code = cli::run_cli({"--from-manifest", cli::manifest_path_for(c.output).string(), "--out", replay.string()},
                                  out, err);
    if (code == cli::ok && slurp(replay) == slurp(c.output) && !slurp(c.output).empty()) {
      ++identical;
    } else {
      o.pass = false;
    }
  }
  o.detail += std::to_string(identical) + "/" + std::to_string(cases.size()) + " outputs reproduced bit-exactly";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "closed-form design identity", 10, closed_form_identity},
      {2, "eigenvalue theorem", 1, eigenvalue_theorem},
      {3, "zero-gain reduction", 1, zero_gain_reduction},
      {4, "locus properties", 120, locus_properties},
      {5, "trajectory locking", 30, trajectory_locking},
      {6, "equator bimodality", 300, equator_bimodality},
      {7, "ensemble-ODE equivalence", 300, ensemble_equivalence},
      {8, "steady-state wandering", 60, steady_wandering},
      {9, "optimizer agreement", 600, optimizer_agreement},
      {10, "manifest reproducibility", 600, manifest_reproducibility},
  };
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 1;
    }
  }
  int failures = 0, ran = 0;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("criterion %d %s: %s  %s  [%.2f s of %.0f s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), seconds, c.budget_seconds);
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
