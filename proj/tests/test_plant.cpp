#include <random>

#include "doctest.h"
#include "phdc/errors.hpp"
#include "phdc/plant.hpp"

using namespace phdc;
using doctest::Approx;

TEST_CASE("grid_voltage at t = 0 and a quarter period") {
  const GridProfile g = GridProfile::constant(60.0, 1.0);
  const double peak = PlantParams{}.nominal_peak();
  CHECK(peak == Approx(391.918).epsilon(1e-5));
  const Vec2 v0 = grid_voltage(0.0, g, peak);
  CHECK(v0[0] == Approx(peak));
  CHECK(v0[1] == Approx(0.0));
  const Vec2 vq = grid_voltage(1.0 / 240.0, g, peak);
  CHECK(std::abs(vq[0]) < 1e-9 * peak);
  CHECK(vq[1] == Approx(peak));
}

TEST_CASE("a 20% sag scales the amplitude and keeps the phase continuous") {
  const GridProfile g({{0.0, 1.0, 60.0, 0.0}, {0.5, 0.8, 60.0, 0.0}});
  const double peak = 391.9;
  const double eps = 1e-9;
  const Vec2 before = grid_voltage(0.5 - eps, g, peak);
  const Vec2 after = grid_voltage(0.5 + eps, g, peak);
  CHECK(after.norm() / before.norm() == Approx(0.8).epsilon(1e-12));
  const double jump = std::atan2(before[0] * after[1] - before[1] * after[0], before.dot(after));
  CHECK(std::abs(jump) < 1e-6);
}

TEST_CASE("angle integrates across a frequency change") {
  const GridProfile g({{0.0, 1.0, 60.0, 0.0}, {0.1, 1.0, 59.0, 0.0}});
  const auto s = g.sample(0.2);
  CHECK(s.angle_rad == Approx(2 * M_PI * (60 * 0.1 + 59 * 0.1)).epsilon(1e-12));
  CHECK(s.omega_rad_s == Approx(2 * M_PI * 59));
}

TEST_CASE("grid profile validation and coverage") {
  CHECK_THROWS_AS(GridProfile({{0.1, 1.0, 60.0, 0.0}}), ScenarioError);
  CHECK_THROWS_AS(GridProfile({{0.0, -0.1, 60.0, 0.0}}), ScenarioError);
  CHECK_THROWS_AS(GridProfile({{0.0, 1.0, 60.0, 0.0}, {0.0, 1.0, 60.0, 0.0}}), ScenarioError);
  GridProfile g = GridProfile::constant();
  g.set_end(1.0);
  CHECK_THROWS_AS(grid_voltage(-1e-3, g, 1.0), ScenarioError);
  CHECK_THROWS_AS(grid_voltage(1.001, g, 1.0), ScenarioError);
  CHECK_NOTHROW(grid_voltage(1.0, g, 1.0));
}

TEST_CASE("cpl_current") {
  CHECK(cpl_current(0.0, 123.0, 80.0).current == 0.0);
  CHECK(cpl_current(400e3, 800.0, 80.0).current == Approx(500.0));
  CHECK_FALSE(cpl_current(400e3, 800.0, 80.0).clamped);
  const auto c = cpl_current(8e3, 40.0, 80.0);
  CHECK(c.clamped);
  CHECK(c.current == Approx(100.0));
  CHECK_THROWS_AS(cpl_current(-1.0, 800.0, 80.0), LoadError);
}

TEST_CASE("CPL incremental conductance is negative") {
  CHECK(cpl_incremental_conductance(400e3, 800.0) == Approx(-0.625));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-3, 1e6);
  for (int k = 0; k < 1000; ++k) CHECK(cpl_incremental_conductance(u(rng), u(rng)) < 0.0);
}

TEST_CASE("ac_node_voltage limit cases") {
  const Vec2 v_g(300.0, 50.0), e(250.0, 80.0);
  SUBCASE("no grid inductance: resistive drop only") {
    PlantParams p;
    p.l_g = 0.0;
    const Vec2 phi = p.l_tot() * Vec2(20.0, -5.0);
    const Vec2 v = ac_node_voltage(phi, e, v_g, p);
    const Vec2 expect = v_g - p.r_g * Vec2(20.0, -5.0);
    CHECK(v[0] == Approx(expect[0]));
    CHECK(v[1] == Approx(expect[1]));
  }
  SUBCASE("lossless symmetric divider") {
    PlantParams p;
    p.r_g = p.r_f = 0.0;
    p.l_g = p.l_f = 1e-4;
    const Vec2 v = ac_node_voltage(p.l_tot() * Vec2(7.0, 3.0), e, v_g, p);
    CHECK(v[0] == Approx(0.5 * (v_g[0] + e[0])));
    CHECK(v[1] == Approx(0.5 * (v_g[1] + e[1])));
  }
}

TEST_CASE("ac_node_voltage satisfies both KVL equations") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    PlantParams p;
    p.r_g = 0.05 * u(rng);
    p.r_f = 0.05 * u(rng);
    p.l_g = 1e-6 + 1e-3 * u(rng);
    p.l_f = 1e-6 + 1e-3 * u(rng);
    const Vec2 v_g = 500.0 * Vec2(u(rng) - 0.5, u(rng) - 0.5);
    const Vec2 e = 500.0 * Vec2(u(rng) - 0.5, u(rng) - 0.5);
    const Vec2 i = 1000.0 * Vec2(u(rng) - 0.5, u(rng) - 0.5);
    const Vec2 v = ac_node_voltage(p.l_tot() * i, e, v_g, p);
    const Vec2 di = (v_g - e - p.r_tot() * i) / p.l_tot();
    const double grid_res = (v_g - v - p.l_g * di - p.r_g * i).norm();
    const double filt_res = (p.l_f * di - (-p.r_f * i + v - e)).norm();
    const double scale = std::max(v_g.norm(), 1.0);
    CHECK(grid_res <= 1e-10 * scale);
    CHECK(filt_res <= 1e-10 * scale);
  }
}

TEST_CASE("converter_dc_current from terminal power") {
  const Vec2 i_f(50.0, 0.0);
  CHECK(converter_dc_current(Vec2::Zero(), i_f, 800.0, 0.98, 80.0) == 0.0);
  CHECK(converter_dc_current(Vec2(10.0, 0.0), i_f, 800.0, 1.0, 80.0) == Approx(0.625));
  // Rectifying: the DC side receives eta times the AC terminal power.
  const double rect = converter_dc_current(Vec2(10.0, 0.0), i_f, 800.0, 0.98, 80.0);
  CHECK(rect == Approx(0.98 * 500.0 / 800.0));
  CHECK(800.0 * rect == Approx(0.98 * 500.0));
  // Inverting: the DC side supplies the AC power plus losses.
  const double inv = converter_dc_current(Vec2(-10.0, 0.0), i_f, 800.0, 0.98, 80.0);
  CHECK(inv == Approx(-500.0 / (0.98 * 800.0)));
  CHECK(inv == Approx(-0.6378).epsilon(1e-4));
  CHECK_THROWS_AS(converter_dc_current(Vec2(10.0, 0.0), i_f, 800.0, 0.0, 80.0), ParameterError);
  CHECK_THROWS_AS(converter_dc_current(Vec2(10.0, 0.0), i_f, 800.0, 1.5, 80.0), ParameterError);
}

TEST_CASE("converter loss is nonnegative in both power directions") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const PlantParams p;
  for (int k = 0; k < 1000; ++k) {
    const Vec2 e = 400.0 * Vec2(u(rng), u(rng));
    const Vec2 i = 1000.0 * Vec2(u(rng), u(rng));
    const double v = 700.0 + 100.0 * u(rng);
    const double pw = e.dot(i);
    const double loss = pw - v * converter_dc_current(e, i, v, p.eta, p.v_dc_min);
    CHECK(loss >= -1e-9 * std::abs(pw));
    const double expect = pw >= 0 ? (1 - p.eta) * pw : (1.0 / p.eta - 1.0) * -pw;
    CHECK(loss == Approx(expect).epsilon(1e-9).scale(std::abs(pw)));
  }
}

TEST_CASE("plant_derivatives at a constructed operating point") {
  const PlantParams p;
  const GridProfile g = GridProfile::constant();
  const Vec2 i(900.0, -60.0);
  EnergyState x;
  x.phi = p.l_tot() * i;
  x.q_dc = p.c_dc * 800.0;
  const Vec2 v_g = grid_voltage(0.0, g, p.nominal_peak());
  const Vec2 e = v_g - p.r_tot() * i;
  const double p_load = p.eta * e.dot(i);
  const auto d = plant_derivatives(x, e, p_load, g, 0.0, p);
  CHECK(d.d_phi.norm() <= 1e-9 * v_g.norm());
  CHECK(std::abs(d.d_q_dc) <= 1e-9 * d.i_load);
}

TEST_CASE("free response with no inputs is purely dissipative") {
  const PlantParams p;
  const GridProfile g = GridProfile::constant(60.0, 0.0);
  EnergyState x;
  x.phi = p.l_tot() * Vec2(100.0, -30.0);
  x.q_dc = p.c_dc * 800.0;
  const auto d = plant_derivatives(x, Vec2::Zero(), 0.0, g, 0.0, p);
  const Vec2 expect = -p.r_tot() * Vec2(100.0, -30.0);
  CHECK(d.d_phi[0] == Approx(expect[0]));
  CHECK(d.d_phi[1] == Approx(expect[1]));
  CHECK(d.d_q_dc == 0.0);
  const auto r = energy_rate_analytic(x, {d.v_g, Vec2::Zero(), 0.0}, p);
  CHECK(r.total < 0.0);
}

TEST_CASE("load profile interpolation and validation") {
  const LoadProfile zoh({{0.0, 1.0}, {0.5, 1.5}}, Interpolation::zero_order_hold, 500e3);
  CHECK(zoh.power_pu(0.49) == 1.0);
  CHECK(zoh.power_pu(0.5) == 1.5);
  CHECK(zoh.power_w(2.0) == Approx(750e3));
  const LoadProfile lin({{0.0, 0.0}, {1.0, 1.0}}, Interpolation::linear, 1.0);
  CHECK(lin.power_pu(0.25) == Approx(0.25));
  CHECK(lin.power_pu(3.0) == 1.0);
  CHECK(lin.breakpoints() == std::vector<double>{1.0});
  CHECK_THROWS_AS(LoadProfile({}, Interpolation::linear, 1.0), LoadError);
  CHECK_THROWS_AS(LoadProfile({{0.0, 1.0}, {0.0, 2.0}}, Interpolation::linear, 1.0), LoadError);
  CHECK_THROWS_AS(LoadProfile({{0.0, -1.0}}, Interpolation::linear, 1.0), LoadError);
}
