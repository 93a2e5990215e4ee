#include <random>

#include "doctest.h"
#include "phdc/errors.hpp"
#include "phdc/ph_core.hpp"
#include "phdc/plant.hpp"

using namespace phdc;
using doctest::Approx;

namespace {

Eigen::MatrixXd m2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST_CASE("validate_structure accepts a canonical skew / PSD pair") {
  const PhStructure s{m2(0, -1, 1, 0), m2(0.1, 0, 0, 0.1), Eigen::MatrixXd::Identity(2, 1)};
  const auto r = validate_structure(s);
  CHECK(r.passed);
  CHECK(r.skew_defect == 0.0);
  CHECK(r.min_eigenvalue == Approx(0.1));
}

TEST_CASE("validate_structure reports the skew defect") {
  const PhStructure s{m2(0, 1, 1, 0), m2(0, 0, 0, 0), Eigen::MatrixXd::Zero(2, 1)};
  const auto r = validate_structure(s);
  CHECK_FALSE(r.passed);
  CHECK(r.skew_defect == Approx(2.0));
}

TEST_CASE("validate_structure finds a negative eigenvalue of R") {
  // Eigenvalues of [[a, b], [b, a]] are a + b and a - b.
  const double a = 0.025, b = 0.075;
  const PhStructure s{m2(0, -1, 1, 0), m2(a, b, b, a), Eigen::MatrixXd::Zero(2, 1)};
  const auto r = validate_structure(s);
  CHECK_FALSE(r.passed);
  CHECK(r.min_eigenvalue == Approx(a - b).epsilon(1e-12));
}

TEST_CASE("validate_structure rejects inconsistent dimensions") {
  const PhStructure s{Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(2, 2),
                      Eigen::MatrixXd::Zero(3, 1)};
  CHECK_THROWS_AS(validate_structure(s), StructuralError);
  const PhStructure g{Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2),
                      Eigen::MatrixXd::Zero(3, 1)};
  CHECK_THROWS_AS(validate_structure(g), StructuralError);
}

TEST_CASE("accepted structures satisfy the quadratic-form properties") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a(4, 4), b(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        a(i, j) = n(rng);
        b(i, j) = n(rng);
      }
    const PhStructure s{a - a.transpose(), b * b.transpose(), Eigen::MatrixXd::Zero(4, 1)};
    REQUIRE(validate_structure(s).passed);
    for (int k = 0; k < 100; ++k) {
      Eigen::VectorXd x(4);
      for (int i = 0; i < 4; ++i) x[i] = n(rng);
      CHECK(std::abs(x.dot(s.J * x)) <= 1e-12 * x.squaredNorm() * s.J.norm());
      CHECK(x.dot(s.R * x) >= -kDefaultTolPsd * x.squaredNorm());
    }
  }
}

TEST_CASE("hamiltonian_total on simple states") {
  PlantParams p;
  PhControllerGains g;
  SUBCASE("zero state") {
    const auto h = hamiltonian_total(EnergyState{}, p, g);
    CHECK(h.g_plus_p == 0.0);
    CHECK(h.dc == 0.0);
    CHECK(h.controller == 0.0);
    CHECK(h.total == 0.0);
  }
  SUBCASE("magnetic energy with L_tot = 1 mH") {
    p.l_g = 0.4e-3;
    p.l_f = 0.6e-3;
    EnergyState x;
    x.phi = Vec2(2e-3, 0.0);
    CHECK(hamiltonian_total(x, p, g).g_plus_p == Approx(2e-3).epsilon(1e-12));
  }
  SUBCASE("DC-link energy at 800 V on 10 mF") {
    p.c_dc = 10e-3;
    EnergyState x;
    x.q_dc = 8.0;
    CHECK(hamiltonian_total(x, p, g).dc == Approx(3200.0).epsilon(1e-12));
  }
  SUBCASE("controller storage") {
    g.a_v = 2.0;
    g.m_i = 3.0;
    EnergyState x;
    x.zeta_v = 0.5;
    x.zeta_i = Vec2(1.0, 2.0);
    CHECK(hamiltonian_total(x, p, g).controller == Approx(0.5 * 2 * 0.25 + 0.5 * 3 * 5));
  }
}

TEST_CASE("hamiltonian_total rejects nonpositive storage parameters") {
  PlantParams p;
  p.c_dc = 0.0;
  CHECK_THROWS_AS(hamiltonian_total(EnergyState{}, p, PhControllerGains{}), ParameterError);
  p = PlantParams{};
  p.l_f = -1e-6;
  CHECK_THROWS_AS(hamiltonian_total(EnergyState{}, p, PhControllerGains{}), ParameterError);
}

TEST_CASE("hamiltonian_total is nonnegative and quadratically homogeneous") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  const PlantParams p;
  PhControllerGains g;
  g.a_v = 0.7;
  g.m_i = 1.3;
  for (int k = 0; k < 200; ++k) {
    EnergyState x;
    x.phi = Vec2(u(rng), u(rng)) * 1e-3;
    x.q_dc = u(rng);
    x.zeta_v = u(rng);
    x.zeta_i = Vec2(u(rng), u(rng));
    const double a = u(rng);
    EnergyState y = x;
    y.phi *= a;
    y.q_dc *= a;
    y.zeta_v *= a;
    y.zeta_i *= a;
    const auto hx = hamiltonian_total(x, p, g);
    const auto hy = hamiltonian_total(y, p, g);
    CHECK(hx.total >= 0.0);
    CHECK(hy.total == Approx(a * a * hx.total).epsilon(1e-12));
  }
}

TEST_CASE("energy_rate_analytic term by term") {
  SUBCASE("no inputs, no current") {
    const PlantParams p;
    EnergyState x;
    x.q_dc = p.c_dc * 800.0;
    const auto r = energy_rate_analytic(x, {}, p);
    CHECK(r.supply == 0.0);
    CHECK(r.line_loss == 0.0);
    CHECK(r.filter_loss == 0.0);
    CHECK(r.converter_loss == 0.0);
    CHECK(r.load == 0.0);
    CHECK(r.total == 0.0);
  }
  SUBCASE("10 A through 10 + 20 mOhm from a 100 V source") {
    PlantParams p;
    p.r_g = 0.01;
    p.r_f = 0.02;
    p.eta = 1.0;
    EnergyState x;
    x.phi = p.l_tot() * Vec2(10.0, 0.0);
    x.q_dc = p.c_dc * 800.0;
    const Vec2 v_g(100.0, 0.0);
    const auto r = energy_rate_analytic(x, {v_g, v_g, 0.0}, p);
    CHECK(r.supply == Approx(1000.0));
    CHECK(r.line_loss == Approx(1.0));
    CHECK(r.filter_loss == Approx(2.0));
    CHECK(r.converter_loss == Approx(0.0));
    CHECK(r.load == 0.0);
    CHECK(r.total == Approx(997.0));
  }
}

TEST_CASE("unit efficiency removes the converter loss for any state") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  PlantParams p;
  p.eta = 1.0;
  for (int k = 0; k < 100; ++k) {
    EnergyState x;
    x.phi = p.l_tot() * Vec2(u(rng), u(rng));
    x.q_dc = p.c_dc * (600.0 + std::abs(u(rng)));
    const auto r = energy_rate_analytic(x, {Vec2(u(rng), u(rng)), Vec2(u(rng), u(rng)),
                                            std::abs(u(rng)) * 1e3},
                                        p);
    CHECK(std::abs(r.converter_loss) <= 1e-9 * (1.0 + std::abs(r.load)));
  }
}

TEST_CASE("energy_rate_analytic guards v_dc") {
  const PlantParams p;
  EnergyState x;
  x.q_dc = p.c_dc * 0.5 * p.v_dc_min;
  CHECK_THROWS_AS(energy_rate_analytic(x, {}, p), SingularityError);
}

TEST_CASE("energy rate equals the gradient times the state derivative") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const PlantParams p;
  const GridProfile grid = GridProfile::constant();
  for (int k = 0; k < 200; ++k) {
    EnergyState x;
    x.phi = p.l_tot() * 800.0 * Vec2(u(rng), u(rng));
    x.q_dc = p.c_dc * (800.0 + 200.0 * u(rng));
    const double t = 0.01 * std::abs(u(rng));
    const Vec2 e = 400.0 * Vec2(u(rng), u(rng));
    const double p_load = 5e5 * std::abs(u(rng));
    const auto d = plant_derivatives(x, e, p_load, grid, t, p);
    const auto grad = hamiltonian_gradient(x, p, PhControllerGains{});
    const double chain = grad.d_phi.dot(d.d_phi) + grad.d_q_dc * d.d_q_dc;
    const auto r = energy_rate_analytic(x, {d.v_g, e, p_load}, p);
    const double scale = std::abs(r.supply) + r.line_loss + r.filter_loss + std::abs(r.converter_loss) +
                         std::abs(r.load) + std::abs(e.dot(d.i)) + 1.0;
    CHECK(std::abs(chain - r.total) <= 1e-9 * scale);
  }
}
