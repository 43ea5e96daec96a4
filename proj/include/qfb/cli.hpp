#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfb/feedback_design.hpp"
#include "qfb/sde.hpp"

namespace qfb::cli {

enum ExitCode : int { ok = 0, usage = 1, domain = 2, statistical = 3 };

/// Accepts raw radians ("0.5236") or multiples of pi ("pi", "-pi/2", "3pi/4", "3*pi/4").
double parse_angle(const std::string& text);

/// Fixed text forms used for every output file: %.12g numbers, LF line endings.
std::string format_number(double v);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_ensemble_csv(std::ostream& os, const EnsembleStats& stats, const EquivalenceReport& eq);
void write_locus_csv(std::ostream& os, const LocusTable& table);

nlohmann::json to_json(const FeedbackDesign& d);
nlohmann::json to_json(const StabilityReport<double>& s);

std::string locus_file_name(double eta);

/// Resolves `path` against $QFB_OUTPUT_DIR when it is relative and the variable is set.
std::filesystem::path resolve_output(const std::filesystem::path& path);

/// Path of the manifest written beside an output file.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

/// Entry point shared by the executable and the tests. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qfb::cli
