#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "phdc/errors.hpp"
#include "phdc/scenario_io.hpp"

using namespace phdc;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text, "t.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("minimal config falls back to the demo defaults") {
  const auto cfg = parse_config_text("[sim]\nscenario = normal\n");
  CHECK(cfg.scenario == demo_scenario("normal"));
  CHECK(cfg.notices.size() > 10);
  for (const auto& n : cfg.notices) CHECK(n.find("not set; using") != std::string::npos);
}

TEST_CASE("config errors name the key and line") {
  const auto bad = error_of("[sim]\nscenario = normal\n[plant]\nc_dc_mf = -1\n");
  CHECK(bad.find("t.ini:4") != std::string::npos);
  CHECK(bad.find("c_dc_mf") != std::string::npos);
  CHECK(bad.find("c_dc must be > 0") != std::string::npos);

  const auto unknown = error_of("[sim]\nscenario = normal\nfoo = 1\n");
  CHECK(unknown.find("t.ini:3") != std::string::npos);
  CHECK(unknown.find("foo") != std::string::npos);

  const auto section = error_of("[sim]\nscenario = normal\n[nope]\nx = 1\n");
  CHECK(section.find("nope") != std::string::npos);

  CHECK(error_of("[sim]\nscenario = normal\n[plant\n").find("t.ini") != std::string::npos);
  CHECK(error_of("[plant]\neta = 0.9\n").find("scenario") != std::string::npos);
  CHECK(error_of("[sim]\nscenario = normal\nduration_s = abc\n").find("duration_s") !=
        std::string::npos);
  CHECK_FALSE(error_of("[sim]\nscenario = normal\n[plant]\neta = 1.5\n").empty());
  CHECK_THROWS_AS(parse_config("/nonexistent/x.ini"), ConfigError);
}

TEST_CASE("serialize/parse round trip is exact") {
  for (const auto& name : demo_names()) {
    const Scenario s = demo_scenario(name);
    const auto back = parse_config_text(serialize_config(s));
    CHECK(back.scenario == s);
    CHECK(back.notices.empty());
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int k = 0; k < 50; ++k) {
    Scenario s = demo_scenario("normal");
    s.plant.l_g *= u(rng);
    s.plant.c_dc *= u(rng);
    s.plant.eta = 0.9 + 0.1 * (u(rng) - 0.5) / 1.5;
    s.controller.ph.k_v *= u(rng);
    s.controller.ph.tau_d *= u(rng);
    s.step_s = 1e-5 * u(rng);
    s.duration_s = 0.3 * u(rng);
    const auto back = parse_config_text(serialize_config(s));
    CHECK(back.scenario == s);
  }
}

TEST_CASE("load profile CSV ingestion") {
  SUBCASE("kW rows map to p.u.") {
    const auto p = parse_load_profile_csv("time_s,power_kw\n0,500\n0.1,250\n", 500e3);
    REQUIRE(p.points().size() == 2);
    CHECK(p.points()[0].power_pu == 1.0);
    CHECK(p.points()[1].power_pu == 0.5);
    CHECK(p.interpolation() == Interpolation::linear);
  }
  auto message = [](const std::string& text) {
    try {
      parse_load_profile_csv(text, 500e3, "rack.csv");
    } catch (const LoadError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("time_s,power_kw\n0,500\n0.2,100\n0.1,100\n").find("row 4") != std::string::npos);
  CHECK(message("time_s,power_kw\n0,500\n0.1,-3\n").find("row 3") != std::string::npos);
  CHECK(message("time_s,power_kw\n0,500\n0.1;3\n").find("row 3") != std::string::npos);
  CHECK(message("t,p\n0,500\n").find("row 1") != std::string::npos);
  CHECK_FALSE(message("").empty());
  CHECK_FALSE(message("time_s,power_kw\n").empty());
}

TEST_CASE("sawtooth profile survives a write/read cycle") {
  std::vector<LoadPoint> pts;
  for (int k = 0; k <= 200; ++k) pts.push_back({k * 0.01, 0.3 + 0.7 * ((k % 10) / 9.0)});
  const LoadProfile p(pts, Interpolation::linear, 500e3);
  const auto back = parse_load_profile_csv(load_profile_csv(p), 500e3);
  REQUIRE(back.points().size() == pts.size());
  for (double t = 0.0; t <= 2.0; t += 0.00123) {
    CHECK(std::abs(back.power_pu(t) - p.power_pu(t)) <= 1e-9);
  }
}

TEST_CASE("trajectory CSV schema") {
  const std::vector<std::string> expected{
      "t_s", "phi_alpha_vs", "phi_beta_vs", "q_dc_c", "zeta_v_vs", "zeta_i_alpha_as",
      "zeta_i_beta_as", "v_g_alpha_v", "v_g_beta_v", "v_ac_alpha_v", "v_ac_beta_v", "e_alpha_v",
      "e_beta_v", "i_f_alpha_a", "i_f_beta_a", "v_dc_v", "i_conv_a", "i_load_a", "p_load_w",
      "p_star_w", "i_f_star_alpha_a", "i_f_star_beta_a", "h_g_plus_p_j", "h_dc_j", "h_c_j",
      "h_cl_j", "supply_w", "line_loss_w", "filter_loss_w", "converter_loss_w", "load_w",
      "hdot_tot_w", "hdot_c_w", "hdot_cl_w", "dissipation_v_w", "dissipation_i_w",
      "hdot_cl_design_w", "flags"};
  CHECK(trajectory_columns() == expected);
  const auto empty = trajectory_csv({});
  CHECK(std::count(empty.begin(), empty.end(), '\n') == 1);
  CHECK(plot_svg(PlotSpec{}).empty());
  CHECK(plot_svg(PlotSpec{"x", "t", "v", {{"a", {}, {}}}, {}}).empty());
}

TEST_CASE("run outputs are reproducible and readable") {
  Scenario s = demo_scenario("normal");
  s.duration_s = 0.6;
  const auto a = run_scenario(s);
  const auto b = run_scenario(s);
  const auto csv = trajectory_csv(a.trajectory);
  CHECK(csv == trajectory_csv(b.trajectory));

  const auto back = parse_trajectory_csv(csv);
  REQUIRE(back.size() == a.trajectory.size());
  for (std::size_t k = 0; k < back.size(); k += 97) {
    CHECK(back[k].t == Approx(a.trajectory[k].t).epsilon(1e-11));
    CHECK(back[k].v_dc == Approx(a.trajectory[k].v_dc).epsilon(1e-11));
    CHECK(back[k].hdot_cl == Approx(a.trajectory[k].hdot_cl).epsilon(1e-11).scale(1.0));
  }
  CHECK_THROWS_AS(parse_trajectory_csv("t_s,v_dc_v\n0,1\n"), Error);

  // v_dc dips after the step and comes back.
  double pre = 0, dip = 1e9;
  for (const auto& r : a.trajectory) {
    if (r.t < 0.5) pre = r.v_dc;
    else dip = std::min(dip, r.v_dc);
  }
  CHECK(dip < pre);
  CHECK(a.trajectory.back().v_dc == Approx(pre).epsilon(5e-3));

  const fs::path dir = fs::temp_directory_path() / "phdc_io_test";
  fs::remove_all(dir);
  const auto written = write_run_outputs(a, s, dir);
  for (const char* f : {"trajectory.csv", "passivity.csv", "summary.csv", "scenario.ini"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(read_text_file(dir / "trajectory.csv") == csv);
  CHECK(parse_config(dir / "scenario.ini").scenario == s);
  const auto summary = read_text_file(dir / "summary.csv");
  CHECK(summary.rfind("scenario,controller,step_s,status,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("synthetic load profile is seeded and bounded") {
  SyntheticLoadSpec spec;
  const auto a = synthetic_load_profile(spec, 2024, 2.0, 500e3);
  const auto b = synthetic_load_profile(spec, 2024, 2.0, 500e3);
  const auto c = synthetic_load_profile(spec, 2025, 2.0, 500e3);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (const auto& p : a.points()) {
    CHECK(p.power_pu >= spec.min_pu);
    CHECK(p.power_pu <= spec.max_pu);
  }
  CHECK(a.points().back().time_s >= 2.0);
}
