// Command-line front end: run, compare, sweep, audit and demo.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phdc/audit.hpp"
#include "phdc/errors.hpp"
#include "phdc/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace phdc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCheck = 2;

struct Common {
  std::string config;
  std::string out;
  std::string controller;
  bool check = false;
  std::optional<std::uint64_t> seed;
  std::optional<double> step_us;
  std::optional<double> duration_s;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_controller = true) {
  cmd->add_option("--out", c.out, "Output directory");
  if (with_controller) {
    cmd->add_option("--controller", c.controller, "Controller")
        ->check(CLI::IsMember({"ph", "pi", "open"}));
  }
  cmd->add_flag("--check", c.check, "Exit 2 unless regulation and passivity checks pass");
  cmd->add_option("--seed", c.seed, "Seed of the synthetic load profile");
  cmd->add_option("--step-us", c.step_us, "Integration step [us]")->check(CLI::PositiveNumber);
  cmd->add_option("--duration-s", c.duration_s, "Simulated horizon [s]")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("-v,--verbose", c.verbose, "List defaulted config keys");
}

// Applies command-line overrides and re-resolves anything they affect.
Scenario apply_overrides(Scenario s, const Common& c) {
  if (!c.controller.empty()) s.controller.kind = controller_kind_from_string(c.controller);
  if (c.seed) s.seed = *c.seed;
  if (c.step_us) {
    // Shift the decimal exponent rather than multiply, so 5 us is exactly 5e-6.
    char buf[40];
    const auto end = std::to_chars(buf, buf + sizeof buf, *c.step_us).ptr;
    s.step_s = std::stod(std::string(buf, end) + "e-6");
  }
  if (c.duration_s) s.duration_s = *c.duration_s;
  if (!c.out.empty()) s.output.dir = c.out;
  if (s.load_spec.source == LoadSource::synthetic) resolve_load(s);
  s.validate();
  return s;
}

Scenario load_scenario(const Common& c) {
  ParsedConfig parsed = parse_config(c.config);
  if (c.verbose) {
    for (const auto& n : parsed.notices) std::cerr << "note: " << n << "\n";
  } else if (!parsed.notices.empty()) {
    std::cerr << "note: " << parsed.notices.size()
              << " keys took default values (--verbose lists them)\n";
  }
  return apply_overrides(parsed.scenario, c);
}

void print_summary(const RunResult& r) {
  const auto& g = r.summary.regulation;
  std::printf("%s [%s]: %s, wall %.2f s\n", r.scenario.c_str(), r.controller.c_str(),
              r.ok() ? "completed" : "FAILED", r.wall_time_s);
  if (!r.ok()) std::printf("  failure: %s\n", r.failure->c_str());
  for (const auto& n : r.notices) std::printf("  notice: %s\n", n.c_str());
  std::printf("  max |v_dc - 1|      %.6f p.u. (undershoot %.6f, overshoot %.6f)\n",
              g.max_deviation_pu, g.undershoot_pu, g.overshoot_pu);
  if (g.recovered()) {
    std::printf("  recovery (+/-%g)  %.6f s after t = %g s\n", g.band_pu, *g.recovery_time_s,
                g.reference_time_s);
  } else {
    std::printf("  recovery (+/-%g)  unrecovered\n", g.band_pu);
  }
  std::printf("  energy-rate mismatch %.3g (relative to peak |dH_cl/dt|)\n",
              r.summary.consistency.max_relative_mismatch);
  std::printf("  passivity violations %zu (max dH_cl/dt - supply = %.6g W)\n",
              r.summary.passivity_violations, r.summary.max_supply_excess);
  if (r.summary.flags_seen) std::printf("  guard flags raised: %u\n", r.summary.flags_seen);
}

int finish_run(const Scenario& s, const RunResult& r, bool check) {
  print_summary(r);
  const auto files = write_run_outputs(r, s, s.output.dir);
  std::printf("  wrote %zu files to %s\n", files.size(), s.output.dir.c_str());
  if (!check) return r.ok() ? kExitOk : kExitError;
  const auto lines = check_run(r, s.check.band_pu, s.check.recovery_window_s);
  for (const auto& l : lines) {
    std::printf("check %-10s %s  %s\n", l.name.c_str(), l.passed ? "PASS" : "FAIL",
                l.detail.c_str());
  }
  return all_passed(lines) ? kExitOk : kExitCheck;
}

// "section.key=v1,v2,..." -> (section, key, values)
struct SweepAxis {
  std::string section, key;
  std::vector<std::string> values;
};

SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  const auto dot = text.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("--param expects section.key=v1,v2,... (got '" + text + "')");
  }
  SweepAxis a{text.substr(0, dot), text.substr(dot + 1, eq - dot - 1), {}};
  std::stringstream ss(text.substr(eq + 1));
  for (std::string v; std::getline(ss, v, ',');) {
    if (!v.empty()) a.values.push_back(v);
  }
  if (a.values.empty()) throw ConfigError("--param " + text + ": no values");
  return a;
}

// Replaces (or adds) one key in serialized config text.
std::string set_key(const std::string& ini, const SweepAxis& a, const std::string& value) {
  std::istringstream in(ini);
  std::ostringstream out;
  std::string line, section;
  bool done = false;
  auto flush_missing = [&](const std::string& leaving) {
    if (!done && leaving == a.section) {
      out << a.key << " = " << value << "\n";
      done = true;
    }
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '[') {
      flush_missing(section);
      section = line.substr(1, line.find(']') - 1);
    } else if (section == a.section && line.rfind(a.key + " =", 0) == 0) {
      out << a.key << " = " << value << "\n";
      done = true;
      continue;
    }
    out << line << "\n";
  }
  flush_missing(section);
  if (!done) out << "[" << a.section << "]\n" << a.key << " = " << value << "\n";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Port-Hamiltonian AC/DC converter simulator and energy audit"};
  app.require_subcommand(1, 1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "Simulate one scenario from a config file");
  run->add_option("--config", run_opts.config, "Scenario config (INI)")
      ->required()
      ->check(CLI::ExistingFile);
  add_common(run, run_opts);

  Common demo_opts;
  std::string demo_name;
  auto* demo = app.add_subcommand("demo", "Built-in case study: normal, ocp or sag");
  demo->add_option("name", demo_name, "Demo name")
      ->required()
      ->check(CLI::IsMember({"normal", "ocp", "sag"}));
  add_common(demo, demo_opts);

  Common cmp_opts;
  std::string cmp_demo;
  auto* cmp = app.add_subcommand("compare", "PH vs PI on the same scenario");
  auto* cmp_cfg = cmp->add_option("--config", cmp_opts.config, "Scenario config (INI)")
                      ->check(CLI::ExistingFile);
  cmp->add_option("demo", cmp_demo, "Demo name instead of --config")
      ->check(CLI::IsMember({"normal", "ocp", "sag"}))
      ->excludes(cmp_cfg);
  add_common(cmp, cmp_opts, false);

  Common sweep_opts;
  std::vector<std::string> axes_text;
  unsigned jobs = 0;
  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over config keys");
  sweep->add_option("--config", sweep_opts.config, "Base scenario config (INI)")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--param", axes_text, "section.key=v1,v2,... (repeatable)")->required();
  sweep->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
  add_common(sweep, sweep_opts);

  std::string audit_csv;
  double audit_tol = 1e-4;
  Common audit_opts;
  auto* audit = app.add_subcommand("audit", "Re-audit a trajectory CSV");
  audit->add_option("trajectory", audit_csv, "trajectory.csv written by run/demo")
      ->required()
      ->check(CLI::ExistingFile);
  audit->add_option("--config", audit_opts.config, "Scenario the trace came from")
      ->check(CLI::ExistingFile);
  audit->add_option("--tol-rel", audit_tol, "Energy-rate mismatch tolerance")
      ->check(CLI::PositiveNumber);
  audit->add_option("--out", audit_opts.out, "Directory for passivity.csv");
  audit->add_flag("--check", audit_opts.check, "Exit 2 on mismatch or passivity violation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return kExitError;
  }

  try {
    if (*run) {
      const Scenario s = load_scenario(run_opts);
      return finish_run(s, run_scenario(s), run_opts.check);
    }
    if (*demo) {
      const Scenario s = apply_overrides(demo_scenario(demo_name), demo_opts);
      return finish_run(s, run_scenario(s), demo_opts.check);
    }
    if (*cmp) {
      if (cmp_opts.config.empty() && cmp_demo.empty()) {
        throw ConfigError("compare needs a demo name or --config");
      }
      Scenario base = cmp_opts.config.empty() ? apply_overrides(demo_scenario(cmp_demo), cmp_opts)
                                              : load_scenario(cmp_opts);
      const std::string root = cmp_opts.out.empty() ? "out/compare_" + base.name : cmp_opts.out;
      Scenario ph = base, pi = base;
      ph.controller.kind = ControllerKind::ph;
      pi.controller.kind = ControllerKind::pi;
      ph.output.dir = root + "/ph";
      pi.output.dir = root + "/pi";
      const auto results = run_sweep({ph, pi}, 1);
      int code = kExitOk;
      code = std::max(code, finish_run(ph, results[0], cmp_opts.check));
      code = std::max(code, finish_run(pi, results[1], false));
      const Comparison c = compare_runs(results[0], results[1]);
      write_text_file(fs::path(root) / "compare.csv", c.to_csv());
      std::printf("\n%s", c.to_text().c_str());
      return code;
    }
    if (*sweep) {
      const Scenario base = load_scenario(sweep_opts);
      std::vector<SweepAxis> axes;
      for (const auto& t : axes_text) axes.push_back(parse_axis(t));
      const std::string root = sweep_opts.out.empty() ? "out/sweep_" + base.name : sweep_opts.out;
      std::vector<std::string> texts{serialize_config(base)};
      std::vector<std::string> labels{""};
      for (const auto& a : axes) {
        std::vector<std::string> nt, nl;
        for (std::size_t k = 0; k < texts.size(); ++k) {
          for (const auto& v : a.values) {
            nt.push_back(set_key(texts[k], a, v));
            nl.push_back(labels[k] + (labels[k].empty() ? "" : ";") + a.section + "." + a.key +
                         "=" + v);
          }
        }
        texts = std::move(nt);
        labels = std::move(nl);
      }
      const fs::path cfg_dir = fs::path(sweep_opts.config).parent_path();
      std::vector<Scenario> scenarios;
      for (std::size_t k = 0; k < texts.size(); ++k) {
        Scenario s = parse_config_text(texts[k], "sweep point " + std::to_string(k + 1), cfg_dir)
                         .scenario;
        s.output.dir = root + "/run_" + std::to_string(k + 1);
        scenarios.push_back(s);
      }
      std::printf("sweep: %zu runs\n", scenarios.size());
      const auto results = run_sweep(scenarios, jobs);
      std::string table = "run,params," + summary_csv(results.front()).substr(0,
                              summary_csv(results.front()).find('\n') + 1);
      int code = kExitOk;
      for (std::size_t k = 0; k < results.size(); ++k) {
        const std::string row = summary_csv(results[k]);
        table += std::to_string(k + 1) + ",\"" + labels[k] + "\"," + row.substr(row.find('\n') + 1);
        write_run_outputs(results[k], scenarios[k], scenarios[k].output.dir);
        const auto& g = results[k].summary.regulation;
        std::printf("  %3zu %-40s max dev %.5f p.u., violations %zu%s\n", k + 1,
                    labels[k].c_str(), g.max_deviation_pu, results[k].summary.passivity_violations,
                    results[k].ok() ? "" : "  FAILED");
        if (sweep_opts.check &&
            !all_passed(check_run(results[k], scenarios[k].check.band_pu,
                                  scenarios[k].check.recovery_window_s))) {
          code = kExitCheck;
        }
      }
      write_text_file(fs::path(root) / "sweep.csv", table);
      std::printf("wrote %s\n", (fs::path(root) / "sweep.csv").string().c_str());
      return code;
    }
    if (*audit) {
      Scenario s;
      if (!audit_opts.config.empty()) s = parse_config(audit_opts.config).scenario;
      Trajectory traj = read_trajectory_csv(audit_csv);
      if (traj.size() < 3) throw Error("trajectory has fewer than 3 records");
      recompute_energy(traj, s.plant, s.controller.ph, s.controller.kind, s.controller.v_dc_star);
      const EnergySeries series = energy_series(traj);
      const auto events = s.event_times();
      const auto cons = energy_consistency_check(series, events, audit_tol);
      const auto pass = passivity_check(series, events, default_passivity_tol(s.plant),
                                        s.controller.kind == ControllerKind::ph);
      std::printf("%s: %zu records\n", audit_csv.c_str(), traj.size());
      std::printf("  energy-rate mismatch %.3g (tolerance %.3g), %zu points flagged\n",
                  cons.max_relative_mismatch, audit_tol, cons.flagged.size());
      std::printf("  passivity violations %zu (max excess %.6g W)\n", pass.violations,
                  pass.max_excess);
      if (!pass.note.empty()) std::printf("  note: %s\n", pass.note.c_str());
      const fs::path out = audit_opts.out.empty() ? fs::path(audit_csv).parent_path()
                                                  : fs::path(audit_opts.out);
      write_text_file(out / "audit_passivity.csv", passivity_csv(pass));
      if (audit_opts.check && (!cons.flagged.empty() || pass.violations > 0)) return kExitCheck;
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}
