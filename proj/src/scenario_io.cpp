#include "phdc/scenario_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "phdc/audit.hpp"
#include "phdc/errors.hpp"

namespace phdc {
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Rewrites a decimal literal in its plainest form without changing its
// exact value: "0.001e3" -> "1", "35e-6" -> "3.5e-05" style stays exact.
std::string normalize_decimal(const std::string& text) {
  std::string mant = text;
  long exp = 0;
  const auto epos = text.find_first_of("eE");
  if (epos != std::string::npos) {
    mant = text.substr(0, epos);
    exp = std::stol(text.substr(epos + 1));
  }
  std::string sign;
  if (!mant.empty() && (mant[0] == '-' || mant[0] == '+')) {
    if (mant[0] == '-') sign = "-";
    mant.erase(0, 1);
  }
  const auto dot = mant.find('.');
  std::string digits = mant;
  long point = static_cast<long>(mant.size());
  if (dot != std::string::npos) {
    digits.erase(dot, 1);
    point = static_cast<long>(dot);
  }
  // value = 0.digits * 10^point
  point += exp;
  const auto nz = digits.find_first_not_of('0');
  if (nz == std::string::npos) return "0";
  digits.erase(0, nz);
  point -= static_cast<long>(nz);
  digits.erase(digits.find_last_not_of('0') + 1);
  const long n = static_cast<long>(digits.size());
  if (point > 0 && point <= 15) {
    if (n <= point) return sign + digits + std::string(static_cast<std::size_t>(point - n), '0');
    return sign + digits.substr(0, static_cast<std::size_t>(point)) + "." +
           digits.substr(static_cast<std::size_t>(point));
  }
  if (point <= 0 && point >= -4) {
    return sign + "0." + std::string(static_cast<std::size_t>(-point), '0') + digits;
  }
  std::string out = sign + digits.substr(0, 1);
  if (n > 1) out += "." + digits.substr(1);
  return out + "e" + std::to_string(point - 1);
}

// Moves the decimal point of a numeric literal by `shift` places through
// its exponent, so "0.5" mH -> "0.0005" H without a rounding multiply.
std::string shift_decimal(const std::string& text, int shift) {
  if (shift == 0) return text;
  std::string mant = text;
  long exp = 0;
  const auto epos = text.find_first_of("eE");
  if (epos != std::string::npos) {
    mant = text.substr(0, epos);
    exp = std::stol(text.substr(epos + 1));
  }
  return normalize_decimal(mant + "e" + std::to_string(exp + shift));
}

std::string fmt12(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------- config

struct NumberField {
  const char* section;
  const char* key;
  int shift;  // config value = SI value * 10^-shift
  std::function<double&(Scenario&)> ref;
};

const std::vector<NumberField>& number_fields() {
  static const std::vector<NumberField> fields = {
      {"sim", "duration_s", 0, [](Scenario& s) -> double& { return s.duration_s; }},
      {"sim", "step_us", -6, [](Scenario& s) -> double& { return s.step_s; }},
      {"sim", "i0_alpha_a", 0, [](Scenario& s) -> double& { return s.i0[0]; }},
      {"sim", "i0_beta_a", 0, [](Scenario& s) -> double& { return s.i0[1]; }},
      {"sim", "v_dc0_v", 0, [](Scenario& s) -> double& { return s.v_dc0; }},
      {"plant", "r_g_mohm", -3, [](Scenario& s) -> double& { return s.plant.r_g; }},
      {"plant", "l_g_mh", -3, [](Scenario& s) -> double& { return s.plant.l_g; }},
      {"plant", "r_f_mohm", -3, [](Scenario& s) -> double& { return s.plant.r_f; }},
      {"plant", "l_f_mh", -3, [](Scenario& s) -> double& { return s.plant.l_f; }},
      {"plant", "c_dc_mf", -3, [](Scenario& s) -> double& { return s.plant.c_dc; }},
      {"plant", "eta", 0, [](Scenario& s) -> double& { return s.plant.eta; }},
      {"plant", "v_base_ac_v", 0, [](Scenario& s) -> double& { return s.plant.v_base_ac; }},
      {"plant", "v_base_dc_v", 0, [](Scenario& s) -> double& { return s.plant.v_base_dc; }},
      {"plant", "s_base_kw", 3, [](Scenario& s) -> double& { return s.plant.s_base; }},
      {"plant", "f_nom_hz", 0, [](Scenario& s) -> double& { return s.plant.f_nom; }},
      {"plant", "v_dc_min_v", 0, [](Scenario& s) -> double& { return s.plant.v_dc_min; }},
      {"controller", "v_dc_star_v", 0,
       [](Scenario& s) -> double& { return s.controller.v_dc_star; }},
      {"controller", "k_v_a", 0, [](Scenario& s) -> double& { return s.controller.ph.k_v; }},
      {"controller", "k_i_per_s", 0,
       [](Scenario& s) -> double& { return s.controller.ph.k_i; }},
      {"controller", "a_v", 0, [](Scenario& s) -> double& { return s.controller.ph.a_v; }},
      {"controller", "m_i", 0, [](Scenario& s) -> double& { return s.controller.ph.m_i; }},
      {"controller", "q_star_var", 0,
       [](Scenario& s) -> double& { return s.controller.ph.q_star; }},
      {"controller", "tau_d_us", -6,
       [](Scenario& s) -> double& { return s.controller.ph.tau_d; }},
      {"controller", "kp_v_a_per_v", 0,
       [](Scenario& s) -> double& { return s.controller.pi.kp_v; }},
      {"controller", "ki_v_a_per_vs", 0,
       [](Scenario& s) -> double& { return s.controller.pi.ki_v; }},
      {"controller", "kp_i_v_per_a", 0,
       [](Scenario& s) -> double& { return s.controller.pi.kp_i; }},
      {"controller", "ki_i_v_per_as", 0,
       [](Scenario& s) -> double& { return s.controller.pi.ki_i; }},
      {"controller", "i_limit_a", 0,
       [](Scenario& s) -> double& { return s.controller.pi.i_limit; }},
      {"load", "synth_min_pu", 0,
       [](Scenario& s) -> double& { return s.load_spec.synthetic.min_pu; }},
      {"load", "synth_max_pu", 0,
       [](Scenario& s) -> double& { return s.load_spec.synthetic.max_pu; }},
      {"load", "synth_hold_min_ms", -3,
       [](Scenario& s) -> double& { return s.load_spec.synthetic.hold_min_s; }},
      {"load", "synth_hold_max_ms", -3,
       [](Scenario& s) -> double& { return s.load_spec.synthetic.hold_max_s; }},
      {"load", "synth_ramp_min_ms", -3,
       [](Scenario& s) -> double& { return s.load_spec.synthetic.ramp_min_s; }},
      {"load", "synth_ramp_max_ms", -3,
       [](Scenario& s) -> double& { return s.load_spec.synthetic.ramp_max_s; }},
      {"check", "band_pu", 0, [](Scenario& s) -> double& { return s.check.band_pu; }},
      {"check", "recovery_band_pu", 0,
       [](Scenario& s) -> double& { return s.check.recovery_band_pu; }},
      {"check", "recovery_window_s", 0,
       [](Scenario& s) -> double& { return s.check.recovery_window_s; }},
  };
  return fields;
}

// Keys that are not plain numbers, per section.
const std::map<std::string, std::set<std::string>>& text_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"sim", {"scenario", "decimation", "initial", "seed"}},
      {"plant", {}},
      {"controller", {"kind"}},
      {"grid", {"segments"}},
      {"load", {"mode", "steps_pu", "interpolation", "csv_path"}},
      {"output", {"dir", "plots", "csv"}},
      {"check", {}},
  };
  return keys;
}

// Config key without its unit suffix, e.g. "c_dc_mf" -> "c_dc".
std::string param_name(const std::string& key) {
  static const char* suffixes[] = {"_a_per_vs", "_a_per_v", "_v_per_as", "_v_per_a", "_per_s",
                                   "_mohm",     "_mh",      "_mf",       "_kw",      "_hz",
                                   "_var",      "_us",      "_ms",       "_v",       "_a"};
  for (const char* suf : suffixes) {
    const std::string sfx = suf;
    if (key.size() > sfx.size() && key.compare(key.size() - sfx.size(), sfx.size(), sfx) == 0) {
      return key.substr(0, key.size() - sfx.size());
    }
  }
  return key;
}

bool known_key(const std::string& section, const std::string& key) {
  const auto& tk = text_keys();
  const auto it = tk.find(section);
  if (it == tk.end()) return false;
  if (it->second.count(key)) return true;
  return std::any_of(number_fields().begin(), number_fields().end(), [&](const NumberField& f) {
    return section == f.section && key == f.key;
  });
}

// Line numbers of "[section]" headers and "key = value" lines.
std::map<std::string, int> locate_lines(std::string_view text) {
  std::map<std::string, int> where;
  std::string section;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const std::string line =
        trim(text.substr(start, end == std::string_view::npos ? text.npos : end - start));
    ++line_no;
    if (!line.empty() && line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      where.emplace(section, line_no);
    } else if (!line.empty() && line.front() != ';' && line.front() != '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) where.emplace(section + "." + trim(line.substr(0, eq)), line_no);
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return where;
}

class ConfigReader {
 public:
  ConfigReader(std::string_view text, std::string origin)
      : origin_(std::move(origin)), lines_(locate_lines(text)) {
    std::istringstream in{std::string(text)};
    try {
      pt::read_ini(in, tree_);
    } catch (const pt::ini_parser_error& e) {
      std::ostringstream os;
      os << origin_ << ":" << e.line() << ": syntax error: " << e.message();
      throw ConfigError(os.str());
    }
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) {
        fail(section, "key outside of any section");
      }
      if (!text_keys().count(section)) fail(section, "unknown section [" + section + "]");
      for (const auto& [key, value] : body) {
        if (!known_key(section, key)) {
          fail(section + "." + key, "unknown key '" + key + "' in [" + section + "]");
        }
      }
    }
  }

  [[noreturn]] void fail(const std::string& where, const std::string& msg) const {
    std::ostringstream os;
    os << origin_;
    const auto it = lines_.find(where);
    if (it != lines_.end()) os << ":" << it->second;
    os << ": " << msg;
    throw ConfigError(os.str());
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(section + "." + key, '.'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  std::string path(const std::string& section, const std::string& key) const {
    return section + "." + key;
  }

 private:
  std::string origin_;
  std::map<std::string, int> lines_;
  pt::ptree tree_;
};

std::vector<std::string> parse_list_rows(const std::string& text) {
  std::vector<std::string> rows;
  for (auto& r : split(text, '|')) {
    if (!r.empty()) rows.push_back(r);
  }
  return rows;
}

std::vector<double> parse_row(const std::string& row, std::size_t expect, bool& ok) {
  std::vector<double> out;
  ok = true;
  for (const auto& part : split(row, ',')) {
    double v = 0.0;
    if (!parse_double(part, v)) {
      ok = false;
      return out;
    }
    out.push_back(v);
  }
  ok = out.size() == expect;
  return out;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

std::string joined_steps(const std::vector<LoadPoint>& pts) {
  std::string out;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k) out += " | ";
    out += shortest(pts[k].time_s) + ", " + shortest(pts[k].power_pu);
  }
  return out;
}

std::string joined_segments(const std::vector<GridSegment>& segs) {
  std::string out;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    if (k) out += " | ";
    const auto& g = segs[k];
    out += shortest(g.start_s) + ", " + shortest(g.amplitude_pu) + ", " +
           shortest(g.frequency_hz) + ", " + shortest(g.phase_rad);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& s, bool& ok) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  ok = ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
  return v;
}

}  // namespace

// ---------------------------------------------------------------- demos

const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names = {"normal", "ocp", "sag"};
  return names;
}

Scenario demo_scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  s.output.dir = "out/" + name;
  if (name == "normal") {
    s.duration_s = 2.0;
    s.load_spec.source = LoadSource::steps;
    s.load_spec.steps = {{0.0, 1.0}, {0.5, 1.5}};
    s.load_spec.interpolation = Interpolation::zero_order_hold;
    s.check = {0.02, 0.005, 0.2};
  } else if (name == "ocp") {
    s.duration_s = 2.0;
    s.load_spec.source = LoadSource::synthetic;
    s.load_spec.interpolation = Interpolation::linear;
    s.seed = 2024;
    s.check = {0.01, 0.01, 0.0};
  } else if (name == "sag") {
    s.duration_s = 1.5;
    s.load_spec.source = LoadSource::steps;
    s.load_spec.steps = {{0.0, 1.0}};
    s.grid = GridProfile({{0.0, 1.0, 60.0, 0.0}, {0.5, 0.8, 60.0, 0.0}, {1.0, 1.0, 60.0, 0.0}});
    s.check = {0.02, 0.005, 0.2};
  } else {
    throw ScenarioError("unknown demo '" + name + "' (expected normal|ocp|sag)");
  }
  resolve_load(s);
  return s;
}

LoadProfile synthetic_load_profile(const SyntheticLoadSpec& spec, std::uint64_t seed,
                                   double duration_s, double base_w) {
  if (!(spec.min_pu >= 0.0 && spec.max_pu >= spec.min_pu)) {
    throw LoadError("synthetic load needs 0 <= synth_min_pu <= synth_max_pu");
  }
  if (!(spec.hold_min_s > 0.0 && spec.hold_max_s >= spec.hold_min_s)) {
    throw LoadError("synthetic load needs 0 < synth_hold_min_ms <= synth_hold_max_ms");
  }
  if (!(spec.ramp_min_s > 0.0 && spec.ramp_max_s >= spec.ramp_min_s)) {
    throw LoadError("synthetic load needs 0 < synth_ramp_min_ms <= synth_ramp_max_ms");
  }
  std::mt19937_64 rng(seed);
  // Explicit 53-bit mapping: identical sequences on every standard library.
  auto uniform = [&](double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  };
  std::vector<LoadPoint> pts;
  double t = 0.0;
  double level = uniform(spec.min_pu, spec.max_pu);
  pts.push_back({0.0, level});
  while (t < duration_s) {
    t += uniform(spec.hold_min_s, spec.hold_max_s);
    pts.push_back({t, level});
    t += uniform(spec.ramp_min_s, spec.ramp_max_s);
    level = uniform(spec.min_pu, spec.max_pu);
    pts.push_back({t, level});
  }
  return LoadProfile(std::move(pts), Interpolation::linear, base_w);
}

void resolve_load(Scenario& s, const fs::path& base_dir) {
  const LoadSpec& ls = s.load_spec;
  switch (ls.source) {
    case LoadSource::steps:
      s.load = LoadProfile(ls.steps, ls.interpolation, s.plant.s_base);
      break;
    case LoadSource::csv: {
      if (ls.csv_path.empty()) throw LoadError("load mode csv needs csv_path");
      fs::path p = ls.csv_path;
      if (p.is_relative()) p = base_dir / p;
      LoadProfile raw = ingest_load_profile(p, s.plant.s_base);
      s.load = LoadProfile(raw.points(), ls.interpolation, s.plant.s_base);
      break;
    }
    case LoadSource::synthetic:
      s.load = synthetic_load_profile(ls.synthetic, s.seed, s.duration_s, s.plant.s_base);
      if (ls.interpolation != Interpolation::linear) {
        s.load = LoadProfile(s.load.points(), ls.interpolation, s.plant.s_base);
      }
      break;
  }
}

// ---------------------------------------------------------------- config I/O

ParsedConfig parse_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config_text(text, path.string(), path.parent_path());
}

ParsedConfig parse_config_text(std::string_view text, const std::string& origin,
                               const fs::path& base_dir) {
  ConfigReader cfg(text, origin);
  ParsedConfig out;
  const auto name = cfg.get("sim", "scenario");
  if (!name || name->empty()) cfg.fail("sim", "missing required key [sim] scenario");

  const auto& demos = demo_names();
  Scenario s;
  if (std::find(demos.begin(), demos.end(), *name) != demos.end()) {
    s = demo_scenario(*name);
  } else {
    s.name = *name;
    s.output.dir = "out/" + *name;
  }
  auto note = [&](const std::string& sec, const std::string& key, const std::string& val) {
    out.notices.push_back("[" + sec + "] " + key + " not set; using " + val);
  };

  for (const auto& f : number_fields()) {
    double& slot = f.ref(s);
    if (const auto v = cfg.get(f.section, f.key)) {
      double parsed = 0.0;
      if (!parse_double(*v, parsed) || !parse_double(shift_decimal(trim(*v), f.shift), slot)) {
        cfg.fail(cfg.path(f.section, f.key),
                 std::string("[") + f.section + "] " + f.key + ": not a finite number: '" + *v +
                     "'");
      }
    } else {
      note(f.section, f.key, shift_decimal(shortest(slot), -f.shift));
    }
  }

  if (const auto v = cfg.get("sim", "decimation")) {
    bool ok = false;
    const auto d = parse_u64(*v, ok);
    if (!ok || d < 1 || d > 1000000) {
      cfg.fail("sim.decimation", "[sim] decimation: expected an integer >= 1, got '" + *v + "'");
    }
    s.decimation = static_cast<int>(d);
  } else {
    note("sim", "decimation", std::to_string(s.decimation));
  }
  if (const auto v = cfg.get("sim", "seed")) {
    bool ok = false;
    s.seed = parse_u64(*v, ok);
    if (!ok) cfg.fail("sim.seed", "[sim] seed: expected a non-negative integer, got '" + *v + "'");
  } else {
    note("sim", "seed", std::to_string(s.seed));
  }
  auto enum_key = [&](const char* sec, const char* key, auto parse, auto& target,
                      const char* current) {
    if (const auto v = cfg.get(sec, key)) {
      try {
        target = parse(*v);
      } catch (const Error& e) {
        cfg.fail(std::string(sec) + "." + key, std::string("[") + sec + "] " + key + ": " + e.what());
      }
    } else {
      note(sec, key, current);
    }
  };
  enum_key("sim", "initial", initial_mode_from_string, s.initial, to_string(s.initial));
  enum_key("controller", "kind", controller_kind_from_string, s.controller.kind,
           to_string(s.controller.kind));
  enum_key("load", "mode", load_source_from_string, s.load_spec.source,
           to_string(s.load_spec.source));
  enum_key("load", "interpolation", interpolation_from_string, s.load_spec.interpolation,
           to_string(s.load_spec.interpolation));

  if (const auto v = cfg.get("grid", "segments")) {
    std::vector<GridSegment> segs;
    for (const auto& row : parse_list_rows(*v)) {
      bool ok = false;
      const auto vals = parse_row(row, 4, ok);
      if (!ok) {
        cfg.fail("grid.segments", "[grid] segments: expected 'start_s, amplitude_pu, "
                                  "frequency_hz, phase_rad' rows separated by '|', got '" +
                                      row + "'");
      }
      segs.push_back({vals[0], vals[1], vals[2], vals[3]});
    }
    try {
      s.grid = GridProfile(std::move(segs));
    } catch (const Error& e) {
      cfg.fail("grid.segments", std::string("[grid] segments: ") + e.what());
    }
  } else {
    note("grid", "segments", joined_segments(s.grid.segments()));
  }

  if (const auto v = cfg.get("load", "steps_pu")) {
    std::vector<LoadPoint> pts;
    for (const auto& row : parse_list_rows(*v)) {
      bool ok = false;
      const auto vals = parse_row(row, 2, ok);
      if (!ok) {
        cfg.fail("load.steps_pu", "[load] steps_pu: expected 'time_s, power_pu' rows "
                                  "separated by '|', got '" + row + "'");
      }
      pts.push_back({vals[0], vals[1]});
    }
    s.load_spec.steps = std::move(pts);
  } else {
    note("load", "steps_pu", joined_steps(s.load_spec.steps));
  }
  if (const auto v = cfg.get("load", "csv_path")) {
    s.load_spec.csv_path = *v;
  } else if (s.load_spec.source == LoadSource::csv) {
    cfg.fail("load", "[load] mode = csv needs csv_path");
  }

  if (const auto v = cfg.get("output", "dir")) {
    s.output.dir = *v;
  } else {
    note("output", "dir", s.output.dir);
  }
  for (const char* key : {"plots", "csv"}) {
    bool& target = std::string(key) == "plots" ? s.output.plots : s.output.csv;
    if (const auto v = cfg.get("output", key)) {
      if (!parse_bool(*v, target)) {
        cfg.fail(std::string("output.") + key,
                 std::string("[output] ") + key + ": expected true/false, got '" + *v + "'");
      }
    } else {
      note("output", key, target ? "true" : "false");
    }
  }

  try {
    resolve_load(s, base_dir);
  } catch (const Error& e) {
    cfg.fail("load", std::string("[load] ") + e.what());
  }
  try {
    s.validate();
  } catch (const Error& e) {
    // Map the parameter name in the message back to its config key.
    const std::string msg = e.what();
    for (const auto& f : number_fields()) {
      if (msg.rfind(param_name(f.key) + " must", 0) == 0) {
        cfg.fail(cfg.path(f.section, f.key),
                 std::string("[") + f.section + "] " + f.key + ": " + msg);
      }
    }
    cfg.fail("sim", msg);
  }
  out.scenario = std::move(s);
  return out;
}

std::string serialize_config(const Scenario& s_in) {
  Scenario s = s_in;
  std::ostringstream os;
  std::string section;
  auto open = [&](const std::string& sec) {
    if (sec == section) return;
    if (!section.empty()) os << "\n";
    os << "[" << sec << "]\n";
    section = sec;
  };
  auto numbers = [&](const std::string& sec) {
    for (const auto& f : number_fields()) {
      if (sec != f.section) continue;
      os << f.key << " = " << shift_decimal(shortest(f.ref(s)), -f.shift) << "\n";
    }
  };
  open("sim");
  os << "scenario = " << s.name << "\n";
  os << "decimation = " << s.decimation << "\n";
  os << "initial = " << to_string(s.initial) << "\n";
  os << "seed = " << s.seed << "\n";
  numbers("sim");
  open("plant");
  numbers("plant");
  open("controller");
  os << "kind = " << to_string(s.controller.kind) << "\n";
  numbers("controller");
  open("grid");
  os << "segments = " << joined_segments(s.grid.segments()) << "\n";
  open("load");
  os << "mode = " << to_string(s.load_spec.source) << "\n";
  os << "interpolation = " << to_string(s.load_spec.interpolation) << "\n";
  os << "steps_pu = " << joined_steps(s.load_spec.steps) << "\n";
  if (!s.load_spec.csv_path.empty()) os << "csv_path = " << s.load_spec.csv_path << "\n";
  numbers("load");
  open("output");
  os << "dir = " << s.output.dir << "\n";
  os << "plots = " << (s.output.plots ? "true" : "false") << "\n";
  os << "csv = " << (s.output.csv ? "true" : "false") << "\n";
  open("check");
  numbers("check");
  return os.str();
}

// ---------------------------------------------------------------- load CSV

LoadProfile ingest_load_profile(const fs::path& path, double s_base_w) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw LoadError(e.what());
  }
  return parse_load_profile_csv(text, s_base_w, path.string());
}

LoadProfile parse_load_profile_csv(std::string_view text, double s_base_w,
                                   const std::string& origin) {
  if (!(s_base_w > 0.0)) throw LoadError("s_base must be > 0");
  std::vector<LoadPoint> pts;
  std::istringstream in{std::string(text)};
  std::string line;
  int row = 0;
  bool header = false;
  auto fail = [&](const std::string& msg) {
    std::ostringstream os;
    os << origin << ": row " << row << ": " << msg;
    throw LoadError(os.str());
  };
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header) {
      if (t != "time_s,power_kw") fail("expected header 'time_s,power_kw', got '" + t + "'");
      header = true;
      continue;
    }
    const auto cells = split(t, ',');
    double time = 0.0, kw = 0.0;
    if (cells.size() != 2 || !parse_double(cells[0], time) || !parse_double(cells[1], kw)) {
      fail("malformed row '" + t + "'");
    }
    if (kw < 0.0) fail("negative power " + cells[1] + " kW");
    if (!pts.empty() && !(time > pts.back().time_s)) fail("time_s is not strictly increasing");
    // kW -> W by exponent shift, then to p.u.
    double w = 0.0;
    parse_double(shift_decimal(cells[1], 3), w);
    pts.push_back({time, w / s_base_w});
  }
  if (!header) throw LoadError(origin + ": empty file (expected header 'time_s,power_kw')");
  if (pts.empty()) throw LoadError(origin + ": no data rows");
  return LoadProfile(std::move(pts), Interpolation::linear, s_base_w);
}

std::string load_profile_csv(const LoadProfile& profile) {
  std::ostringstream os;
  os << "time_s,power_kw\n";
  for (const auto& p : profile.points()) {
    os << shortest(p.time_s) << "," << shortest(p.power_pu * profile.base_w() / 1e3) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------- trajectory CSV

namespace {

struct Column {
  const char* name;
  std::function<double&(Sample&)> ref;
};

const std::vector<Column>& columns() {
  static const std::vector<Column> cols = {
      {"t_s", [](Sample& r) -> double& { return r.t; }},
      {"phi_alpha_vs", [](Sample& r) -> double& { return r.x.phi[0]; }},
      {"phi_beta_vs", [](Sample& r) -> double& { return r.x.phi[1]; }},
      {"q_dc_c", [](Sample& r) -> double& { return r.x.q_dc; }},
      {"zeta_v_vs", [](Sample& r) -> double& { return r.x.zeta_v; }},
      {"zeta_i_alpha_as", [](Sample& r) -> double& { return r.x.zeta_i[0]; }},
      {"zeta_i_beta_as", [](Sample& r) -> double& { return r.x.zeta_i[1]; }},
      {"v_g_alpha_v", [](Sample& r) -> double& { return r.v_g[0]; }},
      {"v_g_beta_v", [](Sample& r) -> double& { return r.v_g[1]; }},
      {"v_ac_alpha_v", [](Sample& r) -> double& { return r.v_ac[0]; }},
      {"v_ac_beta_v", [](Sample& r) -> double& { return r.v_ac[1]; }},
      {"e_alpha_v", [](Sample& r) -> double& { return r.e[0]; }},
      {"e_beta_v", [](Sample& r) -> double& { return r.e[1]; }},
      {"i_f_alpha_a", [](Sample& r) -> double& { return r.i_f[0]; }},
      {"i_f_beta_a", [](Sample& r) -> double& { return r.i_f[1]; }},
      {"v_dc_v", [](Sample& r) -> double& { return r.v_dc; }},
      {"i_conv_a", [](Sample& r) -> double& { return r.i_conv; }},
      {"i_load_a", [](Sample& r) -> double& { return r.i_load; }},
      {"p_load_w", [](Sample& r) -> double& { return r.p_load; }},
      {"p_star_w", [](Sample& r) -> double& { return r.p_star; }},
      {"i_f_star_alpha_a", [](Sample& r) -> double& { return r.i_f_star[0]; }},
      {"i_f_star_beta_a", [](Sample& r) -> double& { return r.i_f_star[1]; }},
      {"h_g_plus_p_j", [](Sample& r) -> double& { return r.h.g_plus_p; }},
      {"h_dc_j", [](Sample& r) -> double& { return r.h.dc; }},
      {"h_c_j", [](Sample& r) -> double& { return r.h.controller; }},
      {"h_cl_j", [](Sample& r) -> double& { return r.h.total; }},
      {"supply_w", [](Sample& r) -> double& { return r.rates.supply; }},
      {"line_loss_w", [](Sample& r) -> double& { return r.rates.line_loss; }},
      {"filter_loss_w", [](Sample& r) -> double& { return r.rates.filter_loss; }},
      {"converter_loss_w", [](Sample& r) -> double& { return r.rates.converter_loss; }},
      {"load_w", [](Sample& r) -> double& { return r.rates.load; }},
      {"hdot_tot_w", [](Sample& r) -> double& { return r.rates.total; }},
      {"hdot_c_w", [](Sample& r) -> double& { return r.hdot_c; }},
      {"hdot_cl_w", [](Sample& r) -> double& { return r.hdot_cl; }},
      {"dissipation_v_w", [](Sample& r) -> double& { return r.dissipation_v; }},
      {"dissipation_i_w", [](Sample& r) -> double& { return r.dissipation_i; }},
      {"hdot_cl_design_w", [](Sample& r) -> double& { return r.hdot_cl_design; }},
  };
  return cols;
}

}  // namespace

const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& c : columns()) n.emplace_back(c.name);
    n.emplace_back("flags");
    return n;
  }();
  return names;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out;
  const auto& names = trajectory_columns();
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (k) out += ',';
    out += names[k];
  }
  out += '\n';
  char buf[40];
  for (Sample r : traj) {
    for (const auto& c : columns()) {
      std::snprintf(buf, sizeof buf, "%.12g,", c.ref(r));
      out += buf;
    }
    out += std::to_string(r.flags);
    out += '\n';
  }
  return out;
}

void emit_trajectory_csv(const Trajectory& traj, const fs::path& path) {
  write_text_file(path, trajectory_csv(traj));
}

Trajectory parse_trajectory_csv(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(origin + ": empty trajectory file");
  const auto header = split(trim(line), ',');
  if (header != trajectory_columns()) {
    throw Error(origin + ": header does not match the trajectory schema");
  }
  Trajectory traj;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != header.size()) {
      throw Error(origin + ": row " + std::to_string(row) + ": wrong number of columns");
    }
    Sample r;
    for (std::size_t k = 0; k < columns().size(); ++k) {
      double v = 0.0;
      const std::string& c = cells[k];
      if (c == "nan") {
        v = std::numeric_limits<double>::quiet_NaN();
      } else if (!parse_double(c, v)) {
        throw Error(origin + ": row " + std::to_string(row) + ": bad number in column " +
                    columns()[k].name);
      }
      columns()[k].ref(r) = v;
    }
    bool ok = false;
    r.flags = static_cast<unsigned>(parse_u64(cells.back(), ok));
    if (!ok) throw Error(origin + ": row " + std::to_string(row) + ": bad flags value");
    traj.push_back(r);
  }
  return traj;
}

Trajectory read_trajectory_csv(const fs::path& path) {
  return parse_trajectory_csv(read_text_file(path), path.string());
}

const std::vector<std::string>& passivity_columns() {
  static const std::vector<std::string> names = {"t_s",        "hdot_cl_w", "hdot_cl_fd_w",
                                                 "supply_w",   "residual_w", "excess_w"};
  return names;
}

std::string passivity_csv(const PassivityReport& r) {
  std::string out = "t_s,hdot_cl_w,hdot_cl_fd_w,supply_w,residual_w,excess_w\n";
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    out += fmt12(r.t[k]) + "," + fmt12(r.hdot_cl[k]) + "," + fmt12(r.hdot_cl_fd[k]) + "," +
           fmt12(r.supply[k]) + "," + fmt12(r.residual[k]) + "," +
           fmt12(r.hdot_cl[k] - r.supply[k]) + "\n";
  }
  return out;
}

std::string summary_csv(const RunResult& r) {
  const auto& g = r.summary.regulation;
  std::ostringstream os;
  os << "scenario,controller,step_s,status,max_deviation_pu,undershoot_pu,overshoot_pu,"
        "recovery_band_pu,recovery_time_s,energy_mismatch_rel,passivity_violations,"
        "max_supply_excess_w,flags\n";
  os << r.scenario << "," << r.controller << "," << fmt12(r.step_s) << ","
     << (r.ok() ? "ok" : "failed") << "," << fmt12(g.max_deviation_pu) << ","
     << fmt12(g.undershoot_pu) << "," << fmt12(g.overshoot_pu) << "," << fmt12(g.band_pu) << ","
     << (g.recovered() ? fmt12(*g.recovery_time_s) : "unrecovered") << ","
     << fmt12(r.summary.consistency.max_relative_mismatch) << ","
     << r.summary.passivity_violations << "," << fmt12(r.summary.max_supply_excess) << ","
     << r.summary.flags_seen << "\n";
  return os.str();
}

// ---------------------------------------------------------------- SVG

namespace {

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace

std::string plot_svg(const PlotSpec& spec) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  std::size_t points = 0;
  for (const auto& s : spec.series) {
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
      ++points;
    }
  }
  if (points == 0) return {};
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 - y0 < 1e-9 * std::max(1.0, std::abs(y0))) {
    const double pad = std::max(1e-6, 0.01 * std::abs(y0));
    y0 -= pad;
    y1 += pad;
  } else {
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }

  constexpr double W = 720, H = 400, L = 80, R = 20, T = 40, B = 55;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream os;
  char buf[128];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << xml_escape(spec.title) << "</text>\n";

  const double xs = nice_step(x1 - x0, 8);
  for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-9 * xs; v += xs) {
    std::snprintf(buf, sizeof buf, "%.6g", std::abs(v) < 1e-12 * xs ? 0.0 : v);
    os << "<line x1=\"" << px(v) << "\" y1=\"" << T << "\" x2=\"" << px(v) << "\" y2=\""
       << H - B << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << px(v) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << buf
       << "</text>\n";
  }
  const double ys = nice_step(y1 - y0, 6);
  for (double v = std::ceil(y0 / ys) * ys; v <= y1 + 1e-9 * ys; v += ys) {
    std::snprintf(buf, sizeof buf, "%.6g", std::abs(v) < 1e-12 * ys ? 0.0 : v);
    os << "<line x1=\"" << L << "\" y1=\"" << py(v) << "\" x2=\"" << W - R << "\" y2=\"" << py(v)
       << "\" stroke=\"#e0e0e0\"/>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << buf
       << "</text>\n";
  }
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
     << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double m : spec.markers) {
    if (m < x0 || m > x1) continue;
    os << "<line x1=\"" << px(m) << "\" y1=\"" << T << "\" x2=\"" << px(m) << "\" y2=\""
       << H - B << "\" stroke=\"#888\" stroke-dasharray=\"4,3\"/>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << xml_escape(spec.x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << (T + H - B) / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(spec.y_label) << "</text>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    const std::size_t stride = std::max<std::size_t>(1, n / 4000);
    os << "<polyline fill=\"none\" stroke=\"" << colors[si % 5] << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t k = 0; k < n; k += stride) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[k]), py(s.y[k]));
      os << buf;
    }
    os << "\"/>\n";
    if (spec.series.size() > 1) {
      const double ly = T + 16 + 16 * static_cast<double>(si);
      os << "<line x1=\"" << W - R - 120 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R - 100
         << "\" y2=\"" << ly - 4 << "\" stroke=\"" << colors[si % 5] << "\" stroke-width=\"2\"/>\n";
      os << "<text x=\"" << W - R - 94 << "\" y=\"" << ly << "\">" << xml_escape(s.label)
         << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

bool emit_plot_svg(const PlotSpec& spec, const fs::path& path) {
  const std::string svg = plot_svg(spec);
  if (svg.empty()) return false;
  write_text_file(path, svg);
  return true;
}

// ---------------------------------------------------------------- run outputs

std::vector<fs::path> write_run_outputs(const RunResult& r, const Scenario& s,
                                        const fs::path& dir) {
  std::vector<fs::path> written;
  auto put = [&](const char* name, const std::string& text) {
    write_text_file(dir / name, text);
    written.push_back(dir / name);
  };
  put("scenario.ini", serialize_config(s));
  put("summary.csv", summary_csv(r));
  if (s.output.csv) {
    put("trajectory.csv", trajectory_csv(r.trajectory));
    // The per-step report is written at the record rate.
    PassivityReport full = passivity_check(r.series, r.events, default_passivity_tol(s.plant),
                                           s.controller.kind == ControllerKind::ph);
    PassivityReport thin;
    const auto stride = static_cast<std::size_t>(s.decimation);
    for (std::size_t k = 0; k < full.t.size(); k += stride) {
      thin.t.push_back(full.t[k]);
      thin.hdot_cl.push_back(full.hdot_cl[k]);
      thin.hdot_cl_fd.push_back(full.hdot_cl_fd[k]);
      thin.supply.push_back(full.supply[k]);
      thin.residual.push_back(full.residual[k]);
    }
    put("passivity.csv", passivity_csv(thin));
  }
  if (s.output.plots && !r.trajectory.empty()) {
    PlotSeries v{"v_dc", {}, {}};
    PlotSeries hdot_tot{"dH_tot/dt", {}, {}};
    PlotSeries hdot_cl{"dH_cl/dt", {}, {}};
    PlotSeries load{"P_load", {}, {}};
    for (const auto& rec : r.trajectory) {
      v.x.push_back(rec.t);
      v.y.push_back(rec.v_dc / s.plant.v_base_dc);
      hdot_tot.x.push_back(rec.t);
      hdot_tot.y.push_back(rec.rates.total / s.plant.s_base);
      hdot_cl.x.push_back(rec.t);
      hdot_cl.y.push_back(rec.hdot_cl / s.plant.s_base);
      load.x.push_back(rec.t);
      load.y.push_back(rec.p_load / 1e3);
    }
    const std::string tag = s.name + " (" + to_string(s.controller.kind) + ")";
    if (emit_plot_svg({"DC bus voltage, " + tag, "time (s)", "v_dc (p.u.)", {v}, r.events},
                      dir / "v_dc.svg")) {
      written.push_back(dir / "v_dc.svg");
    }
    if (emit_plot_svg({"Stored-energy rate, " + tag, "time (s)", "dH/dt (p.u.)",
                       {hdot_tot, hdot_cl}, r.events},
                      dir / "hdot.svg")) {
      written.push_back(dir / "hdot.svg");
    }
    if (emit_plot_svg({"Load power, " + tag, "time (s)", "P_load (kW)", {load}, r.events},
                      dir / "load.svg")) {
      written.push_back(dir / "load.svg");
    }
  }
  return written;
}

// ---------------------------------------------------------------- files

void write_text_file(const fs::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace phdc
