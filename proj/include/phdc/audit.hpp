#pragma once

#include <span>
#include <string>
#include <vector>

#include "phdc/params.hpp"
#include "phdc/trajectory.hpp"

namespace phdc {

/// Default passivity tolerance: 1e-6 of the power base.
inline double default_passivity_tol(const PlantParams& p) { return 1e-6 * p.s_base; }

/// Fourth-order centred first derivative on a uniform grid (five-point
/// stencil), or second-order three-point when fewer than five samples exist.
/// Boundary entries are NaN. Throws Error if fewer than three samples or the
/// spacing is not uniform.
std::vector<double> centered_derivative(std::span<const double> t, std::span<const double> y);

/// True when the stencil centred at t_k reaches an input discontinuity.
bool stencil_touches_event(double t_k, double spacing, std::size_t half_width,
                           std::span<const double> events);

/// Finite-difference dH_cl/dt against the analytic rate. Stencils that
/// straddle an input event are skipped; the mismatch is normalised by the
/// peak analytic rate over the checked points.
EnergyConsistency energy_consistency_check(const EnergySeries& s, std::span<const double> events,
                                           double tol_rel);

/// Recomputes H and its analytic rate for every sample from the measured
/// signals (v_dc, i_f, e, v_g, P_load and the integrator states). Used to
/// re-audit traces read back from disk.
void recompute_energy(Trajectory& traj, const PlantParams& p, const PhControllerGains& g,
                      ControllerKind kind, double v_dc_star);

/// Supply-rate inequality hdot_cl <= v_g^T i_g + tol_abs at every step.
PassivityReport passivity_check(const EnergySeries& s, std::span<const double> events,
                                double tol_abs, bool controller_terms);

/// h[k+1] - h[k] <= rel_tol * |h[k]| for all k. Returns the first offending
/// index, or size() when the sequence is monotone.
std::size_t first_increase(std::span<const double> h, double rel_tol);

/// Deviation of v (already in p.u.) from `nominal`, and the time from
/// `last_event_s` until v re-enters `band` for good.
RegulationReport regulation_metrics(std::span<const double> t, std::span<const double> v_pu,
                                    double nominal, double band, double last_event_s);

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Pass/fail verdicts behind `--check`: the run completed, v_dc stayed in
/// `band_pu`, re-entered `recovery_band_pu` for good within
/// `recovery_window_s` of the last event (skipped when the window is 0),
/// and no step exceeded the supply-rate bound.
std::vector<CheckLine> check_run(const RunResult& r, double band_pu, double recovery_window_s);
bool all_passed(const std::vector<CheckLine>& lines);

struct ComparisonRow {
  std::string metric;
  double first = 0.0;
  double second = 0.0;
  double delta = 0.0;  ///< second - first
};

struct Comparison {
  std::string scenario;
  std::string first_label;
  std::string second_label;
  std::vector<ComparisonRow> rows;
  bool first_recovered = false;
  bool second_recovered = false;

  std::string to_csv() const;
  std::string to_text() const;
};

/// Side-by-side regulation / passivity metrics. Throws ComparisonError when
/// the runs belong to different scenarios.
Comparison compare_runs(const RunResult& first, const RunResult& second);

}  // namespace phdc
