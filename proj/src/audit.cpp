#include "phdc/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "phdc/controllers.hpp"
#include "phdc/errors.hpp"

namespace phdc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double uniform_spacing(std::span<const double> t) {
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (std::abs((t[k] - t[k - 1]) - dt) > 1e-6 * dt) {
      throw Error("finite differences need uniformly spaced samples");
    }
  }
  return dt;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void EnergySeries::reserve(std::size_t n) {
  for (auto* v : {&t, &h_cl, &hdot_cl, &hdot_tot, &supply, &v_dc}) v->reserve(n);
}

EnergySeries energy_series(const Trajectory& traj) {
  EnergySeries s;
  s.reserve(traj.size());
  for (const auto& r : traj) {
    s.t.push_back(r.t);
    s.h_cl.push_back(r.h.total);
    s.hdot_cl.push_back(r.hdot_cl);
    s.hdot_tot.push_back(r.rates.total);
    s.supply.push_back(r.rates.supply);
    s.v_dc.push_back(r.v_dc);
  }
  return s;
}

std::vector<double> centered_derivative(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = t.size();
  if (n < 3 || y.size() != n) throw Error("trajectory too short for a centred difference");
  const double dt = uniform_spacing(t);
  std::vector<double> d(n, kNaN);
  if (n < 5) {
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (y[k + 1] - y[k - 1]) / (2.0 * dt);
    return d;
  }
  for (std::size_t k = 2; k + 2 < n; ++k) {
    d[k] = (y[k - 2] - 8.0 * y[k - 1] + 8.0 * y[k + 1] - y[k + 2]) / (12.0 * dt);
  }
  return d;
}

bool stencil_touches_event(double t_k, double spacing, std::size_t half_width,
                           std::span<const double> events) {
  const double reach = (static_cast<double>(half_width) + 0.5) * spacing;
  return std::any_of(events.begin(), events.end(),
                     [&](double ev) { return std::abs(ev - t_k) <= reach; });
}

EnergyConsistency energy_consistency_check(const EnergySeries& s, std::span<const double> events,
                                           double tol_rel) {
  const auto fd = centered_derivative(s.t, s.h_cl);
  const std::size_t half = s.size() >= 5 ? 2 : 1;
  const double dt = (s.t.back() - s.t.front()) / static_cast<double>(s.size() - 1);

  EnergyConsistency c;
  std::vector<std::size_t> checked;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (std::isnan(fd[k]) || stencil_touches_event(s.t[k], dt, half, events)) continue;
    checked.push_back(k);
    c.peak_rate = std::max(c.peak_rate, std::abs(s.hdot_cl[k]));
  }
  c.points_checked = checked.size();
  // Equilibrium traces have both sides at round-off level; keep the
  // normalisation away from zero.
  const double scale = std::max(c.peak_rate, 1e-9);
  for (std::size_t k : checked) {
    const double mismatch = std::abs(fd[k] - s.hdot_cl[k]);
    if (mismatch > c.max_abs_mismatch) {
      c.max_abs_mismatch = mismatch;
      c.worst_time_s = s.t[k];
    }
    if (mismatch > tol_rel * scale) c.flagged.push_back(k);
  }
  c.max_relative_mismatch = c.max_abs_mismatch / scale;
  return c;
}

void recompute_energy(Trajectory& traj, const PlantParams& p, const PhControllerGains& g,
                      ControllerKind kind, double v_dc_star) {
  const bool ph = kind == ControllerKind::ph;
  const PhControllerGains storage = ph ? g : PhControllerGains{.a_v = 0.0, .m_i = 0.0};
  for (auto& r : traj) {
    r.x.q_dc = p.c_dc * r.v_dc;
    r.x.phi = p.l_tot() * r.i_f;
    r.h = hamiltonian_total(r.x, p, storage);
    r.rates = energy_rate_analytic(r.x, {r.v_g, r.e, r.p_load}, p);
    const double e_v = r.v_dc - v_dc_star;
    const Vec2 e_i = r.i_f - r.i_f_star;
    r.hdot_c = storage.a_v * r.x.zeta_v * e_v + storage.m_i * r.x.zeta_i.dot(e_i);
    r.hdot_cl = r.rates.total + r.hdot_c;
    r.dissipation_v = ph ? g.k_v * e_v * e_v : 0.0;
    r.dissipation_i = ph ? g.k_i * e_i.squaredNorm() : 0.0;
    r.hdot_cl_design = r.rates.supply - r.rates.line_loss - r.rates.filter_loss -
                       r.rates.converter_loss - r.dissipation_v - r.dissipation_i;
  }
}

PassivityReport passivity_check(const EnergySeries& s, std::span<const double> events,
                                double tol_abs, bool controller_terms) {
  PassivityReport r;
  r.controller_terms = controller_terms;
  if (!controller_terms) {
    r.note = "controller storage undefined for this controller; audited against dH_tot/dt only";
  }
  r.t = s.t;
  r.hdot_cl = s.hdot_cl;
  r.supply = s.supply;
  r.hdot_cl_fd.assign(s.size(), kNaN);
  r.residual.assign(s.size(), kNaN);
  if (s.size() >= 3) {
    const auto fd = centered_derivative(s.t, s.h_cl);
    const std::size_t half = s.size() >= 5 ? 2 : 1;
    const double dt = (s.t.back() - s.t.front()) / static_cast<double>(s.size() - 1);
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (std::isnan(fd[k]) || stencil_touches_event(s.t[k], dt, half, events)) continue;
      r.hdot_cl_fd[k] = fd[k];
      r.residual[k] = fd[k] - s.hdot_cl[k];
      r.max_abs_residual = std::max(r.max_abs_residual, std::abs(r.residual[k]));
    }
  }
  r.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double excess = s.hdot_cl[k] - s.supply[k];
    r.max_excess = std::max(r.max_excess, excess);
    if (excess > tol_abs) ++r.violations;
  }
  if (s.size() == 0) r.max_excess = 0.0;
  r.violation_fraction =
      s.size() ? static_cast<double>(r.violations) / static_cast<double>(s.size()) : 0.0;
  return r;
}

std::size_t first_increase(std::span<const double> h, double rel_tol) {
  for (std::size_t k = 0; k + 1 < h.size(); ++k) {
    if (h[k + 1] - h[k] > rel_tol * std::abs(h[k])) return k + 1;
  }
  return h.size();
}

RegulationReport regulation_metrics(std::span<const double> t, std::span<const double> v_pu,
                                    double nominal, double band, double last_event_s) {
  RegulationReport r;
  r.band_pu = band;
  r.reference_time_s = last_event_s;
  if (t.empty()) {
    r.max_deviation_pu = r.undershoot_pu = r.overshoot_pu = kNaN;
    return r;
  }
  double lo = v_pu[0], hi = v_pu[0];
  for (double v : v_pu) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  r.undershoot_pu = std::max(0.0, nominal - lo);
  r.overshoot_pu = std::max(0.0, hi - nominal);
  r.max_deviation_pu = std::max(r.undershoot_pu, r.overshoot_pu);

  // Last sample outside the band at or after the event.
  std::optional<std::size_t> last_out;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < last_event_s) continue;
    if (std::abs(v_pu[k] - nominal) > band) last_out = k;
  }
  if (!last_out) {
    r.recovery_time_s = 0.0;
  } else if (*last_out + 1 < t.size()) {
    r.recovery_time_s = t[*last_out + 1] - last_event_s;
  }
  return r;
}

std::vector<CheckLine> check_run(const RunResult& r, double band_pu, double recovery_window_s) {
  std::vector<CheckLine> out;
  const auto& g = r.summary.regulation;
  out.push_back({"completed", r.ok(), r.ok() ? "run reached the horizon" : *r.failure});
  out.push_back({"band", r.ok() && g.max_deviation_pu <= band_pu,
                 "max |v_dc - 1| = " + fmt(g.max_deviation_pu) + " p.u. (limit " + fmt(band_pu) +
                     ")"});
  if (recovery_window_s > 0.0) {
    const bool ok = r.ok() && g.recovered() && *g.recovery_time_s <= recovery_window_s;
    out.push_back({"recovery", ok,
                   "back within +/-" + fmt(g.band_pu) + " p.u. after " +
                       (g.recovered() ? fmt(*g.recovery_time_s) + " s" : std::string("never")) +
                       " (limit " + fmt(recovery_window_s) + " s)"});
  }
  out.push_back({"passivity", r.ok() && r.summary.passivity_violations == 0,
                 std::to_string(r.summary.passivity_violations) +
                     " steps above the supply rate (max excess " +
                     fmt(r.summary.max_supply_excess) + " W)"});
  return out;
}

bool all_passed(const std::vector<CheckLine>& lines) {
  return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.passed; });
}

Comparison compare_runs(const RunResult& first, const RunResult& second) {
  if (first.scenario != second.scenario) {
    throw ComparisonError("cannot compare runs of different scenarios ('" + first.scenario +
                          "' vs '" + second.scenario + "')");
  }
  Comparison c;
  c.scenario = first.scenario;
  c.first_label = first.controller;
  c.second_label = second.controller;
  const auto& a = first.summary;
  const auto& b = second.summary;
  c.first_recovered = first.ok() && a.regulation.recovered();
  c.second_recovered = second.ok() && b.regulation.recovered();
  auto row = [&](std::string name, double x, double y) {
    c.rows.push_back({std::move(name), x, y, y - x});
  };
  row("max_deviation_pu", a.regulation.max_deviation_pu, b.regulation.max_deviation_pu);
  row("undershoot_pu", a.regulation.undershoot_pu, b.regulation.undershoot_pu);
  row("overshoot_pu", a.regulation.overshoot_pu, b.regulation.overshoot_pu);
  row("recovery_time_s", a.regulation.recovery_time_s.value_or(kNaN),
      b.regulation.recovery_time_s.value_or(kNaN));
  row("passivity_violations", static_cast<double>(a.passivity_violations),
      static_cast<double>(b.passivity_violations));
  row("energy_mismatch_rel", a.consistency.max_relative_mismatch,
      b.consistency.max_relative_mismatch);
  return c;
}

std::string Comparison::to_csv() const {
  std::ostringstream os;
  os << "scenario,metric," << first_label << "," << second_label << ",delta\n";
  for (const auto& r : rows) {
    os << scenario << "," << r.metric << "," << fmt(r.first) << "," << fmt(r.second) << ","
       << fmt(r.delta) << "\n";
  }
  return os.str();
}

std::string Comparison::to_text() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %14s %14s %14s\n", ("scenario " + scenario).c_str(),
                first_label.c_str(), second_label.c_str(), "delta");
  os << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-22s %14s %14s %14s\n", r.metric.c_str(),
                  fmt(r.first).c_str(), fmt(r.second).c_str(), fmt(r.delta).c_str());
    os << line;
  }
  os << "recovered: " << first_label << "=" << (first_recovered ? "yes" : "unrecovered") << ", "
     << second_label << "=" << (second_recovered ? "yes" : "unrecovered") << "\n";
  return os.str();
}

}  // namespace phdc
