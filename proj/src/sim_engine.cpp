#include "phdc/sim_engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "phdc/audit.hpp"
#include "phdc/controllers.hpp"

namespace phdc {
namespace {

constexpr int kMaxLoopIterations = 200;

Vec2 seg(const ClosedLoopState& x, int at) { return x.segment<2>(at); }

PhControllerGains storage_gains(const Scenario& s) {
  if (s.controller.kind == ControllerKind::ph) return s.controller.ph;
  PhControllerGains g;
  g.a_v = 0.0;
  g.m_i = 0.0;
  return g;
}

}  // namespace

EnergyState energy_state(const ClosedLoopState& x) {
  EnergyState e;
  e.phi = seg(x, slot::phi);
  e.q_dc = x[slot::q_dc];
  e.zeta_v = x[slot::zeta_v];
  e.zeta_i = seg(x, slot::zeta_i);
  return e;
}

void Scenario::validate() const {
  auto fail = [](const std::string& m) { throw ScenarioError(m); };
  if (!(step_s > 0.0) || !std::isfinite(step_s)) fail("step must be > 0");
  if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) fail("duration must be >= 0");
  if (duration_s > 0.0 && duration_s < step_s) fail("duration must be at least one step");
  if (decimation < 1) fail("decimation must be >= 1");
  if (initial == InitialMode::explicit_state && !(v_dc0 > 0.0)) {
    fail("explicit initial v_dc must be > 0");
  }
  plant.validate();
  controller.validate();
  if (load.points().empty()) fail("load profile is empty");
}

std::int64_t Scenario::steps() const {
  return static_cast<std::int64_t>(std::llround(duration_s / step_s));
}

std::vector<double> Scenario::event_times() const {
  std::vector<double> ev = grid.breakpoints();
  const auto lb = load.breakpoints();
  ev.insert(ev.end(), lb.begin(), lb.end());
  std::erase_if(ev, [&](double t) { return !(t > 0.0 && t < duration_s); });
  std::sort(ev.begin(), ev.end());
  ev.erase(std::unique(ev.begin(), ev.end()), ev.end());
  return ev;
}

struct ClosedLoop::Solved {
  GridProfile::Sample grid;
  Vec2 v_g = Vec2::Zero();
  Vec2 v_ac = Vec2::Zero();
  Vec2 e = Vec2::Zero();
  double p_load = 0.0;
  double i_load = 0.0;
  PhControllerOutput ph;
  PiControllerOutput pi;
  PlantDerivative plant;
  unsigned flags = 0;
};

ClosedLoop::ClosedLoop(const Scenario& s) : s_(s) {}

ClosedLoop::Solved ClosedLoop::solve(double t, const ClosedLoopState& x) const {
  const PlantParams& p = s_.plant;
  const ControllerConfig& c = s_.controller;
  Solved r;
  const EnergyState es = energy_state(x);
  const Vec2 i = es.phi / p.l_tot();
  const double v_dc = es.q_dc / p.c_dc;
  r.grid = s_.grid.sample(t);
  r.v_g = r.grid.amplitude_pu * p.nominal_peak() *
          Vec2(std::cos(r.grid.angle_rad), std::sin(r.grid.angle_rad));
  r.p_load = s_.load.power_w(t);
  const auto load = cpl_current(r.p_load, v_dc, p.v_dc_min);
  r.i_load = load.current;

  // e and v_ac depend on each other; the map v_ac -> e -> v_ac contracts by
  // roughly L_g / L_tot, so plain fixed-point iteration converges.
  auto control = [&](const Vec2& v_ac) -> Vec2 {
    const Measurements m{v_dc, v_ac, i, r.i_load};
    switch (c.kind) {
      case ControllerKind::ph: {
        const PhControllerState st{es.zeta_v, es.zeta_i, seg(x, slot::ref_filter)};
        r.ph = ph_controller_step(m, st, c.ph, c.v_dc_star, p);
        return r.ph.e;
      }
      case ControllerKind::pi: {
        const PiControllerState st{x[slot::pi_v], seg(x, slot::pi_i)};
        r.pi = pi_controller_step(m, st, c.pi, c.v_dc_star, r.grid.angle_rad,
                                  r.grid.omega_rad_s, p);
        return r.pi.e;
      }
      case ControllerKind::open:
        break;
    }
    return Vec2::Zero();
  };

  const double tol = 1e-12 * p.nominal_peak();
  Vec2 v_ac = r.v_g;
  int it = 0;
  for (;; ++it) {
    if (it == kMaxLoopIterations) {
      throw IntegrationError("algebraic loop for v_ac did not converge", t);
    }
    const Vec2 e = control(v_ac);
    const Vec2 next = ac_node_voltage(es.phi, e, r.v_g, p);
    const double change = (next - v_ac).lpNorm<Eigen::Infinity>();
    v_ac = next;
    if (change <= tol) break;
  }
  last_iterations_ = it + 1;
  r.v_ac = v_ac;
  r.e = control(v_ac);

  r.plant = plant_derivatives(es, r.e, r.p_load, s_.grid, t, p);
  if (r.plant.cpl_clamped) r.flags |= kFlagCplClamp;
  if (r.plant.conv_clamped) r.flags |= kFlagConverterClamp;
  if (c.kind == ControllerKind::pi && r.pi.limited) r.flags |= kFlagCurrentLimit;
  return r;
}

ClosedLoopState ClosedLoop::derivative(double t, const ClosedLoopState& x) const {
  const Solved r = solve(t, x);
  ClosedLoopState dx = ClosedLoopState::Zero();
  dx.segment<2>(slot::phi) = r.plant.d_phi;
  dx[slot::q_dc] = r.plant.d_q_dc;
  if (s_.controller.kind == ControllerKind::ph) {
    dx[slot::zeta_v] = r.ph.d_zeta_v;
    dx.segment<2>(slot::zeta_i) = r.ph.d_zeta_i;
    dx.segment<2>(slot::ref_filter) = r.ph.d_ref_filter;
  } else if (s_.controller.kind == ControllerKind::pi) {
    dx[slot::pi_v] = r.pi.d_v_integral;
    dx.segment<2>(slot::pi_i) = r.pi.d_i_integral;
  }
  return dx;
}

ClosedLoopState ClosedLoop::evaluate(double t, const ClosedLoopState& x, Sample& out) const {
  const Solved r = solve(t, x);
  const PlantParams& p = s_.plant;
  const ControllerConfig& c = s_.controller;
  ClosedLoopState dx = ClosedLoopState::Zero();
  dx.segment<2>(slot::phi) = r.plant.d_phi;
  dx[slot::q_dc] = r.plant.d_q_dc;

  out = Sample{};
  out.t = t;
  out.x = energy_state(x);
  out.v_g = r.v_g;
  out.v_ac = r.v_ac;
  out.e = r.e;
  out.i_f = r.plant.i;
  out.v_dc = r.plant.v_dc;
  out.i_conv = r.plant.i_conv;
  out.i_load = r.plant.i_load;
  out.p_load = r.p_load;
  out.flags = r.flags;

  const PhControllerGains storage = storage_gains(s_);
  out.h = hamiltonian_total(out.x, p, storage);
  out.rates = energy_rate_analytic(out.x, {r.v_g, r.e, r.p_load}, p);

  if (c.kind == ControllerKind::ph) {
    dx[slot::zeta_v] = r.ph.d_zeta_v;
    dx.segment<2>(slot::zeta_i) = r.ph.d_zeta_i;
    dx.segment<2>(slot::ref_filter) = r.ph.d_ref_filter;
    out.p_star = r.ph.p_star;
    out.i_f_star = r.ph.i_f_star;
    out.dissipation_v = r.ph.dissipation_v;
    out.dissipation_i = r.ph.dissipation_i;
    out.hdot_c = storage.a_v * out.x.zeta_v * r.ph.d_zeta_v +
                 storage.m_i * out.x.zeta_i.dot(r.ph.d_zeta_i);
  } else if (c.kind == ControllerKind::pi) {
    dx[slot::pi_v] = r.pi.d_v_integral;
    dx.segment<2>(slot::pi_i) = r.pi.d_i_integral;
    out.p_star = r.pi.p_star;
    out.i_f_star = r.pi.i_f_star;
  }
  out.hdot_cl = out.rates.total + out.hdot_c;
  out.hdot_cl_design = out.rates.supply - out.rates.line_loss - out.rates.filter_loss -
                       out.rates.converter_loss - out.dissipation_v - out.dissipation_i;
  return dx;
}

namespace {

// Unknowns of the steady-state solve, all scaled to per-unit.
struct SteadyLayout {
  bool ph = false;
  bool with_zeta_v = false;
  bool with_pi_v = false;
  bool with_pi_i = false;
  int n = 0;
};

struct SteadyScales {
  double i_base, v_dc_base, peak, omega;
};

ClosedLoopState cold_start(const Scenario& s) {
  ClosedLoopState x = ClosedLoopState::Zero();
  x[slot::q_dc] = s.plant.c_dc * s.controller.v_dc_star;
  return x;
}

}  // namespace

Initialization equilibrium_initializer(const Scenario& s) {
  Initialization init;
  const PlantParams& p = s.plant;
  const ControllerConfig& c = s.controller;
  init.x = cold_start(s);
  if (c.kind == ControllerKind::open) {
    init.converged = true;
    return init;
  }

  const auto g0 = s.grid.sample(0.0);
  const double theta = g0.angle_rad;
  const double omega = g0.omega_rad_s;
  const double v_g = g0.amplitude_pu * p.nominal_peak();
  const double p_load = s.load.power_w(0.0);
  const SteadyScales sc{p.s_base / p.nominal_peak(), p.v_base_dc, p.nominal_peak(),
                        p.omega_nom()};
  const Eigen::Matrix2d rot = rotation(theta);
  const Eigen::Matrix2d jq = quarter_turn();

  SteadyLayout lay;
  lay.ph = c.kind == ControllerKind::ph;
  if (lay.ph) {
    lay.with_zeta_v = c.ph.a_v > 0.0;
    lay.n = 7 + (lay.with_zeta_v ? 1 : 0);
  } else {
    lay.with_pi_v = c.pi.ki_v > 0.0;
    lay.with_pi_i = c.pi.ki_i > 0.0;
    lay.n = 3 + (lay.with_pi_v ? 1 : 0) + (lay.with_pi_i ? 2 : 0);
  }

  // Rotating-frame vectors map to alpha-beta through R(theta) at t = 0.
  auto to_state = [&](const Eigen::VectorXd& y) {
    ClosedLoopState x = ClosedLoopState::Zero();
    x.segment<2>(slot::phi) = p.l_tot() * (rot * (sc.i_base * y.segment<2>(0)));
    x[slot::q_dc] = p.c_dc * sc.v_dc_base * y[2];
    int k = 3;
    if (lay.ph) {
      x.segment<2>(slot::ref_filter) = rot * (sc.i_base * y.segment<2>(k));
      k += 2;
      x.segment<2>(slot::zeta_i) = rot * (sc.i_base / sc.omega * y.segment<2>(k));
      k += 2;
      if (lay.with_zeta_v) x[slot::zeta_v] = sc.v_dc_base / sc.omega * y[k++];
    } else {
      if (lay.with_pi_v) x[slot::pi_v] = sc.i_base * y[k++];
      if (lay.with_pi_i) {
        x.segment<2>(slot::pi_i) = sc.peak * y.segment<2>(k);
        k += 2;
      }
    }
    return x;
  };

  const ClosedLoop loop(s);
  // d/dt of a rotating vector R(wt) v is R(wt) (dv/dt + w J v); the steady
  // state in the rotating frame needs R^T xdot - w J v = 0.
  auto residual = [&](const Eigen::VectorXd& y) {
    const ClosedLoopState x = to_state(y);
    const ClosedLoopState dx = loop.derivative(0.0, x);
    Eigen::VectorXd f(lay.n);
    const Vec2 phi_dq = rot.transpose() * seg(x, slot::phi);
    f.segment<2>(0) = (rot.transpose() * seg(dx, slot::phi) - omega * jq * phi_dq) / sc.peak;
    f[2] = dx[slot::q_dc] / (p.s_base / p.v_base_dc);
    int k = 3;
    if (lay.ph) {
      const Vec2 z_dq = rot.transpose() * seg(x, slot::ref_filter);
      f.segment<2>(k) = (rot.transpose() * seg(dx, slot::ref_filter) - omega * jq * z_dq) /
                        (sc.i_base * sc.omega);
      k += 2;
      const Vec2 zi_dq = rot.transpose() * seg(x, slot::zeta_i);
      f.segment<2>(k) =
          (rot.transpose() * seg(dx, slot::zeta_i) - omega * jq * zi_dq) / sc.i_base;
      k += 2;
      if (lay.with_zeta_v) f[k++] = dx[slot::zeta_v] / sc.v_dc_base;
    } else {
      if (lay.with_pi_v) f[k++] = dx[slot::pi_v] / c.pi.ki_v / sc.v_dc_base;
      if (lay.with_pi_i) {
        f.segment<2>(k) = seg(dx, slot::pi_i) / c.pi.ki_i / sc.i_base;
        k += 2;
      }
    }
    return f;
  };

  // Closed-form starting point with the current in phase with the voltage
  // it is referenced to and lossless reference tracking.
  Eigen::VectorXd y = Eigen::VectorXd::Zero(lay.n);
  y[2] = c.v_dc_star / sc.v_dc_base;
  const double p_ac = p_load / p.eta;
  double i_mag = 0.0;
  Vec2 i_dq = Vec2::Zero();
  if (lay.ph) {
    double v_ac = v_g;
    for (int k = 0; k < 50; ++k) {
      const double disc = v_ac * v_ac - 4.0 * p.r_f * p_ac;
      if (disc < 0.0) break;
      i_mag = p.r_f > 0.0 ? (v_ac - std::sqrt(disc)) / (2.0 * p.r_f) : p_ac / v_ac;
      const double x_l = omega * p.l_g * i_mag;
      if (v_g * v_g < x_l * x_l) break;
      v_ac = std::sqrt(v_g * v_g - x_l * x_l) - p.r_g * i_mag;
    }
    const double delta = -std::atan2(omega * p.l_g * i_mag, v_ac + p.r_g * i_mag);
    i_dq = i_mag * Vec2(std::cos(delta), std::sin(delta));
    // Dirty derivative in sinusoidal steady state: z = i* / (1 + j w tau).
    const double wt = omega * c.ph.tau_d;
    const Vec2 z = (i_dq - wt * (jq * i_dq)) / (1.0 + wt * wt);
    y.segment<2>(3) = z / sc.i_base;
  } else {
    const double disc = v_g * v_g - 4.0 * p.r_tot() * p_ac;
    if (disc >= 0.0) {
      i_mag = p.r_tot() > 0.0 ? (v_g - std::sqrt(disc)) / (2.0 * p.r_tot()) : p_ac / v_g;
    }
    i_dq = Vec2(i_mag, 0.0);
    int k = 3;
    if (lay.with_pi_v) y[k++] = i_mag / sc.i_base;
    if (lay.with_pi_i) y.segment<2>(k) = Vec2(p.r_f * i_mag, 0.0) / sc.peak;
  }
  y.segment<2>(0) = i_dq / sc.i_base;

  try {
    Eigen::VectorXd f = residual(y);
    for (init.iterations = 0; init.iterations < 100; ++init.iterations) {
      if (f.lpNorm<Eigen::Infinity>() <= 1e-12) break;
      Eigen::MatrixXd jac(lay.n, lay.n);
      for (int j = 0; j < lay.n; ++j) {
        Eigen::VectorXd yp = y;
        const double dy = 1e-7 * std::max(1.0, std::abs(y[j]));
        yp[j] += dy;
        jac.col(j) = (residual(yp) - f) / dy;
      }
      const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-f);
      if (!step.allFinite()) break;
      y += step;
      f = residual(y);
      if (step.lpNorm<Eigen::Infinity>() <= 1e-14) break;
    }
    init.residual_pu = f.lpNorm<Eigen::Infinity>();
    init.converged = init.residual_pu <= 1e-6;
  } catch (const Error&) {
    init.converged = false;
  }

  if (init.converged) {
    init.x = to_state(y);
  } else {
    std::ostringstream os;
    os << "equilibrium initializer did not converge (residual " << init.residual_pu
       << " p.u.); cold start with zero current and v_dc = " << c.v_dc_star << " V";
    init.notice = os.str();
    init.x = cold_start(s);
  }
  return init;
}

RunResult run_scenario(const Scenario& s) {
  const auto wall_start = std::chrono::steady_clock::now();
  RunResult res;
  res.scenario = s.name;
  res.controller = to_string(s.controller.kind);
  res.step_s = s.step_s;
  res.nominal_v_dc = s.plant.v_base_dc;
  res.s_base = s.plant.s_base;
  res.events = s.event_times();

  Scenario local = s;
  local.grid.set_end(s.duration_s);
  const std::int64_t n = local.steps();
  const double h = local.step_s;

  ClosedLoopState x;
  try {
    local.validate();
    switch (local.initial) {
      case InitialMode::equilibrium: {
        Initialization init = equilibrium_initializer(local);
        if (!init.notice.empty()) res.notices.push_back(init.notice);
        x = init.x;
        break;
      }
      case InitialMode::cold:
        x = cold_start(local);
        break;
      case InitialMode::explicit_state:
        x = ClosedLoopState::Zero();
        x.segment<2>(slot::phi) = local.plant.l_tot() * local.i0;
        x[slot::q_dc] = local.plant.c_dc * local.v_dc0;
        x.segment<2>(slot::ref_filter) = local.i0;
        break;
    }
  } catch (const Error& e) {
    res.failure = e.what();
    return res;
  }

  if (n > 0) {
    const ClosedLoop loop(local);
    auto f = [&](double t, const ClosedLoopState& xs) { return loop.derivative(t, xs); };
    res.trajectory.reserve(static_cast<std::size_t>(n / local.decimation + 1));
    res.series.reserve(static_cast<std::size_t>(n + 1));
    Sample rec;
    double t = 0.0;
    try {
      for (std::int64_t k = 0;; ++k) {
        t = static_cast<double>(k) * h;
        const ClosedLoopState k1 = loop.evaluate(t, x, rec);
        res.series.t.push_back(t);
        res.series.h_cl.push_back(rec.h.total);
        res.series.hdot_cl.push_back(rec.hdot_cl);
        res.series.hdot_tot.push_back(rec.rates.total);
        res.series.supply.push_back(rec.rates.supply);
        res.series.v_dc.push_back(rec.v_dc);
        res.summary.flags_seen |= rec.flags;
        if (k % local.decimation == 0) res.trajectory.push_back(rec);
        if (k == n) break;
        x = rk4_step(f, x, t, h, k1);
        if (!(x[slot::q_dc] > 0.0)) throw IntegrationError("DC-link charge reached zero", t);
      }
    } catch (const IntegrationError& e) {
      std::ostringstream os;
      os << "integration failed at t = " << e.time() << " s: " << e.what();
      res.failure = os.str();
    } catch (const Error& e) {
      std::ostringstream os;
      os << "run aborted at t = " << t << " s: " << e.what();
      res.failure = os.str();
    }
  }

  // Summary metrics over the full-resolution trace.
  std::vector<double> v_pu(res.series.v_dc.size());
  for (std::size_t k = 0; k < v_pu.size(); ++k) v_pu[k] = res.series.v_dc[k] / res.nominal_v_dc;
  const double last_event = res.events.empty() ? 0.0 : res.events.back();
  res.summary.regulation =
      regulation_metrics(res.series.t, v_pu, local.controller.v_dc_star / res.nominal_v_dc,
                         local.check.recovery_band_pu, last_event);
  if (res.series.size() >= 3) {
    res.summary.consistency = energy_consistency_check(res.series, res.events, 1e-4);
  }
  const auto pass = passivity_check(res.series, res.events, default_passivity_tol(local.plant),
                                    local.controller.kind == ControllerKind::ph);
  res.summary.passivity_violations = pass.violations;
  res.summary.max_supply_excess = pass.max_excess;
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return res;
}

std::vector<RunResult> run_sweep(const std::vector<Scenario>& scenarios, unsigned workers) {
  std::vector<RunResult> out(scenarios.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(scenarios.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < scenarios.size(); k = next++) {
      out[k] = run_scenario(scenarios[k]);
    }
  };
  std::vector<std::jthread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  return out;
}

const char* to_string(InitialMode m) {
  switch (m) {
    case InitialMode::equilibrium: return "equilibrium";
    case InitialMode::cold: return "cold";
    case InitialMode::explicit_state: return "explicit";
  }
  return "?";
}

InitialMode initial_mode_from_string(const std::string& s) {
  if (s == "equilibrium") return InitialMode::equilibrium;
  if (s == "cold") return InitialMode::cold;
  if (s == "explicit") return InitialMode::explicit_state;
  throw ScenarioError("unknown initial mode '" + s + "' (expected equilibrium|cold|explicit)");
}

const char* to_string(LoadSource s) {
  switch (s) {
    case LoadSource::steps: return "steps";
    case LoadSource::csv: return "csv";
    case LoadSource::synthetic: return "synthetic";
  }
  return "?";
}

LoadSource load_source_from_string(const std::string& s) {
  if (s == "steps") return LoadSource::steps;
  if (s == "csv") return LoadSource::csv;
  if (s == "synthetic") return LoadSource::synthetic;
  throw ScenarioError("unknown load mode '" + s + "' (expected steps|csv|synthetic)");
}

const char* to_string(Interpolation m) {
  return m == Interpolation::linear ? "linear" : "zoh";
}

Interpolation interpolation_from_string(const std::string& s) {
  if (s == "zoh") return Interpolation::zero_order_hold;
  if (s == "linear") return Interpolation::linear;
  throw ScenarioError("unknown interpolation '" + s + "' (expected zoh|linear)");
}

}  // namespace phdc
