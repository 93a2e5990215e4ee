#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "phdc/sim_engine.hpp"

namespace phdc {

struct ParsedConfig {
  Scenario scenario;
  std::vector<std::string> notices;  ///< one line per defaulted key
};

/// Reads an INI-style scenario file. Unknown sections or keys, malformed
/// numbers and constraint violations throw ConfigError with file:line.
/// `[sim] scenario` may name a built-in demo (normal, ocp, sag); its values
/// then serve as the defaults for every key the file leaves out.
ParsedConfig parse_config(const std::filesystem::path& path);

/// Same as parse_config on in-memory text. Relative CSV paths resolve
/// against `base_dir`; `origin` is used in error messages.
ParsedConfig parse_config_text(std::string_view text, const std::string& origin = "<config>",
                               const std::filesystem::path& base_dir = ".");

/// Writes every key explicitly, so parse_config_text(serialize_config(s))
/// reproduces `s` exactly.
std::string serialize_config(const Scenario& s);

/// Built-in scenarios: "normal" (1.0 -> 1.5 p.u. load step at 0.5 s),
/// "ocp" (seeded synthetic rack profile) and "sag" (grid at 0.8 p.u.
/// between 0.5 s and 1.0 s). Throws ScenarioError for other names.
Scenario demo_scenario(const std::string& name);
const std::vector<std::string>& demo_names();

/// Seeded stand-in for a measured rack profile, in p.u., linear interpolation.
LoadProfile synthetic_load_profile(const SyntheticLoadSpec& spec, std::uint64_t seed,
                                   double duration_s, double base_w);

/// Rebuilds Scenario::load from Scenario::load_spec.
void resolve_load(Scenario& s, const std::filesystem::path& base_dir = ".");

/// CSV with header "time_s,power_kw". Throws LoadError naming the row.
LoadProfile ingest_load_profile(const std::filesystem::path& path, double s_base_w);
LoadProfile parse_load_profile_csv(std::string_view text, double s_base_w,
                                   const std::string& origin = "<load>");
std::string load_profile_csv(const LoadProfile& profile);

/// Column names of the trajectory CSV, in order.
const std::vector<std::string>& trajectory_columns();
std::string trajectory_csv(const Trajectory& traj);
/// Throws Error when the file cannot be written.
void emit_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
/// Reads a file written by emit_trajectory_csv. Throws Error on schema mismatch.
Trajectory read_trajectory_csv(const std::filesystem::path& path);
Trajectory parse_trajectory_csv(std::string_view text, const std::string& origin = "<csv>");

const std::vector<std::string>& passivity_columns();
std::string passivity_csv(const PassivityReport& r);
std::string summary_csv(const RunResult& r);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  std::vector<double> markers;  ///< vertical dashed lines (event times)
};

/// Standalone SVG line chart. Returns an empty string when there is no data.
std::string plot_svg(const PlotSpec& spec);
/// Returns false (and writes nothing) when there is no data.
bool emit_plot_svg(const PlotSpec& spec, const std::filesystem::path& path);

/// Writes trajectory.csv, passivity.csv, summary.csv, scenario.ini and
/// (when enabled) v_dc.svg, hdot.svg and load.svg into `dir`. Returns the
/// paths written.
std::vector<std::filesystem::path> write_run_outputs(const RunResult& r, const Scenario& s,
                                                     const std::filesystem::path& dir);

/// Writes `text` to `path`, creating parent directories. Throws Error.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace phdc
