#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the code under test except
// the functions being exercised.

#include <cmath>
#include <random>
#include <vector>

#include "phdc/controllers.hpp"
#include "phdc/sim_engine.hpp"

namespace oracle {

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Global error of RK4 on x' = -x over [0, 1] for each step count.
inline std::vector<double> rk4_exponential_errors(const std::vector<int>& steps) {
  std::vector<double> errs;
  for (int n : steps) {
    const double h = 1.0 / n;
    double x = 1.0;
    for (int k = 0; k < n; ++k) {
      x = phdc::rk4_step([](double, double v) { return -v; }, x, k * h, h);
    }
    errs.push_back(std::abs(x - std::exp(-1.0)));
  }
  return errs;
}

/// Log-log slope of the RK4 global error versus h.
inline double rk4_order() {
  const std::vector<int> steps{10, 20, 40, 80, 160};
  const auto errs = rk4_exponential_errors(steps);
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    lx.push_back(std::log(1.0 / steps[k]));
    ly.push_back(std::log(errs[k]));
  }
  return fit_slope(lx, ly);
}

struct DecayRun {
  std::vector<double> t;
  std::vector<double> norm;  ///< |i_f - i_f*|
};

/// Filter current under the damping-injection law with frozen references:
/// L_f di/dt = v_ac - e - R_f i, e from inner_current_loop, e_i(0) = (1, 0).
inline DecayRun inner_loop_decay(double k_i, double l_f, double r_f, double t_end, double h) {
  const phdc::Vec2 v_ac(300.0, -120.0);
  const phdc::Vec2 i_star(250.0, 40.0);
  const phdc::Vec2 zero = phdc::Vec2::Zero();
  auto f = [&](double, const phdc::Vec2& i) -> phdc::Vec2 {
    const phdc::Vec2 e = phdc::inner_current_loop(i, i_star, zero, v_ac, r_f, l_f, k_i);
    return (v_ac - e - r_f * i) / l_f;
  };
  DecayRun run;
  phdc::Vec2 i = i_star + phdc::Vec2(1.0, 0.0);
  const int n = static_cast<int>(std::llround(t_end / h));
  for (int k = 0; k <= n; ++k) {
    run.t.push_back(k * h);
    run.norm.push_back((i - i_star).norm());
    if (k < n) i = phdc::rk4_step(f, i, k * h, h);
  }
  return run;
}

/// Decay rate from a log-linear fit of the error norm.
inline double fitted_decay_rate(const DecayRun& run) {
  std::vector<double> ly;
  for (double v : run.norm) ly.push_back(std::log(v));
  return -fit_slope(run.t, ly);
}

struct DvocStats {
  double worst_active = 0.0;    ///< max |v^T i - p*| / scale
  double worst_reactive = 0.0;  ///< max |(J v)^T i - q*| / scale
};

/// Random (v_ac, p*, q*) with |v_ac| above the guard. The residual is scaled
/// by |v_ac| |i*|, the size of the terms being cancelled.
inline DvocStats dvoc_property(int samples, std::uint64_t seed, double v_min) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::uniform_real_distribution<double> mag(1.0, 40.0);
  std::uniform_real_distribution<double> pq(-1e6, 1e6);
  const Eigen::Matrix2d jq = phdc::quarter_turn();
  DvocStats s;
  for (int k = 0; k < samples; ++k) {
    const double a = angle(rng);
    const phdc::Vec2 v = v_min * mag(rng) * phdc::Vec2(std::cos(a), std::sin(a));
    const double p = pq(rng), q = pq(rng);
    const phdc::Vec2 i = phdc::dvoc_current_reference(p, q, v, v_min);
    const double scale = v.norm() * i.norm();
    s.worst_active = std::max(s.worst_active, std::abs(v.dot(i) - p) / scale);
    s.worst_reactive = std::max(s.worst_reactive, std::abs((jq * v).dot(i) - q) / scale);
  }
  return s;
}

}  // namespace oracle
