#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "qfb/cli.hpp"
#include "qfb/errors.hpp"

#ifndef QFB_VERSION
#define QFB_VERSION "dev"
#endif

namespace qfb::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

/// Exact round-trip text for arguments stored in manifests.
std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct DesignFlags {
  std::string theta = "pi/6";
  double gamma = 1;
  double eta = 1;
  std::string objective = "purity";
  std::optional<double> equator_offset;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--theta", theta, "target Bloch angle, radians or multiples of pi (e.g. pi/6)")
        ->capture_default_str();
    cmd.add_option("--gamma", gamma, "decay rate")->capture_default_str();
    cmd.add_option("--eta", eta, "detector efficiency in [0, 1]")->capture_default_str();
    cmd.add_option("--objective", objective, "purity or noise")->capture_default_str();
    cmd.add_option("--near-equator-offset", equator_offset,
                   "design equatorial targets this many radians off the equator");
  }

  void validate() const {
    if (!(gamma > 0)) throw std::invalid_argument("--gamma must be positive");
    if (!(eta >= 0 && eta <= 1)) throw std::invalid_argument("--eta must lie in [0, 1]");
    parse_objective(objective);
    if (equator_offset && !(*equator_offset > 0)) throw std::invalid_argument("--near-equator-offset must be positive");
  }

  SearchConfig search() const {
    SearchConfig cfg;
    if (equator_offset) cfg.equator_offset = *equator_offset;
    return cfg;
  }

  void append(std::vector<std::string>& a, double theta_rad) const {
    a.insert(a.end(), {"--theta", exact(theta_rad), "--gamma", exact(gamma), "--eta", exact(eta), "--objective", objective});
    if (equator_offset) a.insert(a.end(), {"--near-equator-offset", exact(*equator_offset)});
  }
};

struct SimFlags {
  DesignFlags design;
  std::optional<double> alpha;
  std::optional<double> lambda;
  double dt = 1e-3;
  double t_final = 10;
  std::uint64_t seed = 1;
  std::string initial = "0,0,-1";
  std::size_t record_every = 1;
  bool allow_large_dt = false;
  std::string out;

  void add_to(CLI::App& cmd, const std::string& default_out) {
    design.add_to(cmd);
    out = default_out;
    cmd.add_option("--alpha", alpha, "driving amplitude (with --lambda, overrides the design)");
    cmd.add_option("--lambda", lambda, "feedback gain (with --alpha, overrides the design)");
    cmd.add_option("--dt", dt, "time step")->capture_default_str();
    cmd.add_option("--t-final", t_final, "duration")->capture_default_str();
    cmd.add_option("--seed", seed, "64-bit random seed")->capture_default_str();
    cmd.add_option("--initial", initial, "initial Bloch vector x,y,z")->capture_default_str();
    cmd.add_option("--record-every", record_every, "keep every k-th step")->capture_default_str();
    cmd.add_flag("--allow-large-dt", allow_large_dt, "accept dt above 1e-2/gamma with a warning");
    cmd.add_option("--out", out, "output CSV")->capture_default_str();
  }

  Bloch3d initial_state() const {
    std::stringstream ss(initial);
    std::string item;
    std::vector<double> v;
    while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
    if (v.size() != 3) throw std::invalid_argument("--initial needs three comma-separated components");
    return Bloch3d(v[0], v[1], v[2]);
  }

  void append(std::vector<std::string>& a, double theta_rad) const {
    design.append(a, theta_rad);
    if (alpha) a.insert(a.end(), {"--alpha", exact(*alpha)});
    if (lambda) a.insert(a.end(), {"--lambda", exact(*lambda)});
    a.insert(a.end(), {"--dt", exact(dt), "--t-final", exact(t_final), "--seed", std::to_string(seed), "--initial",
                       initial, "--record-every", std::to_string(record_every)});
    if (allow_large_dt) a.push_back("--allow-large-dt");
  }
};

std::string equator_message(double theta, double gamma, double eta) {
  std::ostringstream msg;
  msg << "theta = " << format_number(theta) << " lies on the equator: ";
  if (eta == 1) {
    const auto s = stability_eigenvalues(Params{gamma, 1.0, alpha_eta1(theta, gamma), lambda_eta1(theta, gamma)});
    msg << "the designed pure state is only marginally stable (eigenvalues";
    for (const auto& v : s.eigenvalues) msg << ' ' << format_number(v.real());
    msg << "; classification " << to_string(s.classification) << ")";
  } else {
    msg << "the driving diverges and the reachable purity vanishes";
  }
  msg << "; pass --near-equator-offset to design a nearby state";
  return msg.str();
}

/// Dynamics parameters for the stochastic commands: explicit (alpha, lambda), the
/// closed form at eta = 1 (valid on the equator too), or the numerical design.
Params resolve_params(const SimFlags& f, double theta) {
  const auto& d = f.design;
  if (f.alpha.has_value() != f.lambda.has_value()) throw std::invalid_argument("--alpha and --lambda go together");
  if (f.alpha) return {d.gamma, d.eta, *f.alpha, *f.lambda};
  if (d.eta == 1) return {d.gamma, 1.0, alpha_eta1(theta, d.gamma), lambda_eta1(theta, d.gamma)};
  if (on_equator(theta) && !d.equator_offset) throw DomainError(DomainError::Kind::singular_direction, equator_message(theta, d.gamma, d.eta));
  return design(theta, d.gamma, d.eta, parse_objective(d.objective), d.search()).params();
}

SimConfig sim_config(const SimFlags& f, const Params& p) {
  SimConfig cfg;
  cfg.dt = f.dt;
  cfg.t_final = f.t_final;
  cfg.seed = f.seed;
  cfg.initial_state = f.initial_state();
  cfg.params = p;
  cfg.record_every = f.record_every;
  cfg.allow_large_dt = f.allow_large_dt;
  return cfg;
}

json params_json(const Params& p) {
  return {{"gamma", p.gamma}, {"eta", p.eta}, {"alpha", p.alpha}, {"lambda", p.lambda}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

struct Manifest {
  Manifest(std::string cmd, std::vector<std::string> args) : command(std::move(cmd)), arguments(std::move(args)) {}

  std::string command;
  std::vector<std::string> arguments;
  json parameters = json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;

  void write(const fs::path& path, std::chrono::steady_clock::time_point started) const {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json j = {{"command", command},       {"arguments", arguments}, {"parameters", parameters},
              {"seeds", seeds},           {"outputs", outputs},     {"warnings", warnings},
              {"version", QFB_VERSION},   {"duration_seconds", seconds}};
    write_text(path, j.dump(2) + "\n");
  }
};

void print_design(std::ostream& out, const FeedbackDesign& d, const StabilityReport<double>& s) {
  const auto& b = d.steady_state;
  out << "theta       " << format_number(d.theta) << (d.near_equator ? "  (moved off the equator)" : "") << '\n'
      << "lambda      " << format_number(d.lambda_opt) << '\n'
      << "alpha       " << format_number(d.alpha_opt) << '\n'
      << "steady      " << format_number(b(0)) << ' ' << format_number(b(1)) << ' ' << format_number(b(2)) << '\n'
      << "r_squared   " << format_number(d.r_squared) << '\n'
      << "eigenvalues";
  for (const auto& v : s.eigenvalues) {
    out << ' ' << format_number(v.real());
    if (v.imag() != 0) out << (v.imag() > 0 ? "+" : "") << format_number(v.imag()) << 'i';
  }
  out << '\n' << "stability   " << to_string(s.classification) << '\n';
  if (d.outside_nominal) out << "warning     optimum lies outside [-sqrt(gamma), 0]\n";
}

int cmd_design(const DesignFlags& f, const std::optional<std::string>& json_out, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  f.validate();
  const double theta = parse_angle(f.theta);
  if (on_equator(theta) && !f.equator_offset) {
    throw DomainError(DomainError::Kind::singular_direction, equator_message(theta, f.gamma, f.eta));
  }
  const FeedbackDesign d = design(theta, f.gamma, f.eta, parse_objective(f.objective), f.search());
  const auto s = stability_eigenvalues(d.params());
  json j = to_json(d);
  j["stability"] = to_json(s);
  if (json_out && *json_out == "-") {
    out << j.dump(2) << '\n';
    return ok;
  }
  print_design(out, d, s);
  if (json_out) {
    const fs::path path = resolve_output(*json_out);
    write_text(path, j.dump(2) + "\n");
    Manifest m{"design", {"design"}};
    f.append(m.arguments, theta);
    m.arguments.insert(m.arguments.end(), {"--json", path.string()});
    m.parameters = j;
    m.outputs = {path.string()};
    m.write(manifest_path_for(path), started);
  }
  return ok;
}

int cmd_locus(const std::vector<double>& etas, double gamma, std::size_t n_theta, const std::string& objective,
              const std::string& out_dir, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  if (!(gamma > 0)) throw std::invalid_argument("--gamma must be positive");
  if (n_theta < 1) throw std::invalid_argument("--n-theta must be positive");
  for (const double e : etas) {
    if (!(e >= 0 && e <= 1)) throw std::invalid_argument("--eta values must lie in [0, 1]");
  }
  const Objective obj = parse_objective(objective);
  const fs::path dir = resolve_output(out_dir);
  fs::create_directories(dir);
  const auto grid = locus_theta_grid(n_theta);

  Manifest m{"locus", {"locus", "--gamma", exact(gamma), "--n-theta", std::to_string(n_theta), "--objective", objective,
                       "--out", dir.string()}};
  std::string eta_list;
  for (const double e : etas) eta_list += (eta_list.empty() ? "" : ",") + exact(e);
  m.arguments.insert(m.arguments.end(), {"--eta", eta_list});
  m.parameters = {{"eta", etas}, {"gamma", gamma}, {"n_theta", n_theta}, {"objective", objective}};

  for (const double e : etas) {
    const LocusTable table = build_locus(e, gamma, grid, obj);
    std::ostringstream csv;
    write_locus_csv(csv, table);
    const fs::path file = dir / locus_file_name(e);
    write_text(file, csv.str());
    m.outputs.push_back(file.string());
    std::size_t failed = 0;
    for (const auto& r : table.rows) failed += r.error.empty() ? 0 : 1;
    out << file.string() << "  rows " << table.rows.size() << "  errors " << failed << '\n';
  }
  m.write(dir / "manifest.json", started);
  return ok;
}

int cmd_simulate(const SimFlags& f, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  f.design.validate();
  const double theta = parse_angle(f.design.theta);
  const Params p = resolve_params(f, theta);
  const SimConfig cfg = sim_config(f, p);
  const Trajectory traj = simulate(cfg);
  for (const auto& w : traj.warnings) err << "warning: " << w << '\n';

  const fs::path path = resolve_output(f.out);
  std::ostringstream csv;
  write_trajectory_csv(csv, traj);
  write_text(path, csv.str());

  Manifest m{"simulate", {"simulate"}};
  f.append(m.arguments, theta);
  m.arguments.insert(m.arguments.end(), {"--out", path.string()});
  m.parameters = {{"params", params_json(p)}, {"dt", f.dt}, {"t_final", f.t_final}, {"theta", theta}};
  m.seeds = {f.seed};
  m.outputs = {path.string()};
  m.warnings = traj.warnings;
  m.write(manifest_path_for(path), started);

  const auto& last = traj.states.back();
  out << path.string() << "  steps " << step_count(cfg) << "  final " << format_number(last(0)) << ' '
      << format_number(last(1)) << ' ' << format_number(last(2)) << "  max|r2-1| "
      << format_number(traj.max_purity_defect) << '\n';
  return ok;
}

int cmd_ensemble(const SimFlags& f, std::size_t n_traj, std::size_t samples, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  f.design.validate();
  if (samples < 1) throw std::invalid_argument("--samples must be positive");
  const double theta = parse_angle(f.design.theta);
  const Params p = resolve_params(f, theta);
  SimConfig cfg = sim_config(f, p);
  cfg.n_trajectories = n_traj;
  cfg.record_every = std::max<std::size_t>(1, step_count(cfg) / samples);
  const auto warnings = check_config(cfg);
  for (const auto& w : warnings) err << "warning: " << w << '\n';

  const EnsembleStats stats = ensemble(cfg);
  const EquivalenceReport eq = compare_with_deterministic(stats, cfg);

  const fs::path path = resolve_output(f.out);
  std::ostringstream csv;
  write_ensemble_csv(csv, stats, eq);
  write_text(path, csv.str());

  Manifest m{"ensemble", {"ensemble"}};
  f.append(m.arguments, theta);
  m.arguments.insert(m.arguments.end(), {"--n-trajectories", std::to_string(n_traj), "--samples",
                                         std::to_string(samples), "--out", path.string()});
  m.parameters = {{"params", params_json(p)}, {"dt", f.dt},       {"t_final", f.t_final},
                  {"theta", theta},           {"n_trajectories", n_traj}, {"record_every", cfg.record_every}};
  m.seeds = {f.seed};
  m.outputs = {path.string()};
  m.warnings = warnings;
  m.write(manifest_path_for(path), started);

  out << path.string() << "  trajectories " << n_traj;
  if (!stats.stderr_defined) {
    out << "  equivalence test skipped (stderr undefined for one trajectory)\n";
    return ok;
  }
  out << "  worst |mean - ode| / stderr " << format_number(eq.worst_z) << (eq.pass ? "  PASS" : "  FAIL") << '\n';
  return eq.pass ? ok : statistical;
}

int rerun_manifest(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.size() != 2 && !(args.size() == 4 && args[2] == "--out")) {
    throw std::invalid_argument("usage: --from-manifest FILE [--out PATH]");
  }
  std::ifstream is(args[1]);
  if (!is) throw std::invalid_argument("cannot read manifest " + args[1]);
  const json m = json::parse(is);
  auto replay = m.at("arguments").get<std::vector<std::string>>();
  if (args.size() == 4) {
    const std::string flag = m.at("command") == "design" ? "--json" : "--out";
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < replay.size(); ++i) {
      if (replay[i] == flag) {
        replay[i + 1] = args[3];
        replaced = true;
      }
    }
    if (!replaced) throw std::invalid_argument("manifest has no output to redirect");
  }
  return run_cli(replay, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (!args.empty() && args[0] == "--from-manifest") {
    try {
      return rerun_manifest(args, out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return usage;
    }
  }

  CLI::App app{"Homodyne feedback stabilization of a two-level atom"};
  app.set_version_flag("--version", std::string(QFB_VERSION));
  app.require_subcommand(1);
  app.footer("Re-run a recorded command: qfb --from-manifest FILE [--out PATH]\n"
             "Relative output paths resolve against $QFB_OUTPUT_DIR when it is set.");

  auto* design_cmd = app.add_subcommand("design", "optimal feedback and driving for a target angle");
  DesignFlags design_flags;
  design_flags.add_to(*design_cmd);
  std::optional<std::string> json_out;
  design_cmd->add_option("--json", json_out, "write the design as JSON ('-' prints JSON only)");

  auto* locus_cmd = app.add_subcommand("locus", "optimal-purity loci over a theta grid, one CSV per eta");
  std::vector<double> etas{1, 0.8, 0.6, 0.4, 0.2, 0};
  double locus_gamma = 1;
  std::size_t n_theta = 180;
  std::string locus_objective = "purity";
  std::string locus_out = "locus";
  locus_cmd->add_option("--eta", etas, "comma-separated efficiencies")->delimiter(',')->capture_default_str();
  locus_cmd->add_option("--gamma", locus_gamma, "decay rate")->capture_default_str();
  locus_cmd->add_option("--n-theta", n_theta, "grid size")->capture_default_str();
  locus_cmd->add_option("--objective", locus_objective, "purity or noise")->capture_default_str();
  locus_cmd->add_option("--out", locus_out, "output directory")->capture_default_str();

  auto* sim_cmd = app.add_subcommand("simulate", "one conditioned trajectory with its photocurrent");
  SimFlags sim_flags;
  sim_flags.add_to(*sim_cmd, "trajectory.csv");

  auto* ens_cmd = app.add_subcommand("ensemble", "ensemble statistics checked against the averaged equations");
  SimFlags ens_flags;
  ens_flags.add_to(*ens_cmd, "ensemble.csv");
  std::size_t n_traj = 1000;
  std::size_t samples = 20;
  ens_cmd->add_option("--n-trajectories", n_traj, "number of trajectories")->capture_default_str();
  ens_cmd->add_option("--samples", samples, "number of sampled times")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    if (*design_cmd) return cmd_design(design_flags, json_out, out);
    if (*locus_cmd) return cmd_locus(etas, locus_gamma, n_theta, locus_objective, locus_out, out);
    if (*sim_cmd) return cmd_simulate(sim_flags, out, err);
    if (*ens_cmd) return cmd_ensemble(ens_flags, n_traj, samples, out, err);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return domain;
  } catch (const ContainmentError& e) {
    err << "error: " << e.what() << '\n';
    return domain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  }
  return usage;
}

}  // namespace qfb::cli
