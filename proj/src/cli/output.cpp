#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>

#include "qfb/cli.hpp"

namespace qfb::cli {

namespace {

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::string row_flags(const LocusRow& r) {
  std::string f;
  if (r.near_equator) f = "equator";
  if (r.outside_nominal) f += f.empty() ? "outside_nominal" : "|outside_nominal";
  return f;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,x,y,z,r2,I_dt\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto& b = traj.states[i];
    os << format_number(traj.times[i]) << ',' << format_number(b(0)) << ',' << format_number(b(1)) << ','
       << format_number(b(2)) << ',' << format_number(b.squaredNorm()) << ','
       << format_number(traj.photocurrent_increments[i]) << '\n';
  }
}

void write_ensemble_csv(std::ostream& os, const EnsembleStats& stats, const EquivalenceReport& eq) {
  os << "t,mean_x,mean_y,mean_z,se_x,se_y,se_z,mean_r2,det_x,det_y,det_z,max_z\n";
  std::size_t j = 0;
  for (std::size_t i = 0; i < stats.times.size(); ++i) {
    const auto& m = stats.mean_bloch[i];
    const auto& s = stats.stderr_bloch[i];
    os << format_number(stats.times[i]);
    for (int c = 0; c < 3; ++c) os << ',' << format_number(m(c));
    for (int c = 0; c < 3; ++c) os << ',' << format_number(s(c));
    os << ',' << format_number(stats.mean_r_squared[i]);
    if (j < eq.times.size() && eq.times[j] == stats.times[i]) {
      for (int c = 0; c < 3; ++c) os << ',' << format_number(eq.deterministic[j](c));
      os << ',' << format_number(eq.max_z[j]);
      ++j;
    } else {
      for (int c = 0; c < 3; ++c) os << ',' << format_number(m(c));
      os << ",0";
    }
    os << '\n';
  }
}

void write_locus_csv(std::ostream& os, const LocusTable& table) {
  os << "theta,lambda_opt,alpha_opt,x_ss,z_ss,r_squared,flags,errors\n";
  for (const auto& r : table.rows) {
    os << format_number(r.theta) << ',' << format_number(r.lambda_opt) << ',' << format_number(r.alpha_opt) << ','
       << format_number(r.x_ss) << ',' << format_number(r.z_ss) << ',' << format_number(r.r_squared) << ','
       << row_flags(r) << ',' << sanitize(r.error) << '\n';
  }
}

nlohmann::json to_json(const StabilityReport<double>& s) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& v : s.eigenvalues) ev.push_back({{"re", v.real()}, {"im", v.imag()}});
  return {{"eigenvalues", ev}, {"classification", to_string(s.classification)}};
}

nlohmann::json to_json(const FeedbackDesign& d) {
  return {
      {"requested_theta", d.requested_theta},
      {"theta", d.theta},
      {"gamma", d.gamma},
      {"eta", d.eta},
      {"lambda", d.lambda_opt},
      {"alpha", d.alpha_opt},
      {"steady_state", {d.steady_state(0), d.steady_state(1), d.steady_state(2)}},
      {"r_squared", d.r_squared},
      {"objective", to_string(d.objective)},
      {"objective_value", d.objective_value},
      {"near_equator", d.near_equator},
      {"outside_nominal", d.outside_nominal},
  };
}

std::string locus_file_name(double eta) { return "locus_eta_" + format_number(eta) + ".csv"; }

std::filesystem::path resolve_output(const std::filesystem::path& path) {
  if (path.is_absolute()) return path;
  if (const char* dir = std::getenv("QFB_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
    return std::filesystem::path(dir) / path;
  }
  return path;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  auto p = output;
  p += ".manifest.json";
  return p;
}

}  // namespace qfb::cli
