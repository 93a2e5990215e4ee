#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "phdc/ph_core.hpp"

namespace phdc {

/// Guard flags raised on a sample.
enum SampleFlag : unsigned {
  kFlagCplClamp = 1u << 0,        ///< CPL current computed with v_dc_min
  kFlagConverterClamp = 1u << 1,  ///< converter current computed with v_dc_min
  kFlagCurrentLimit = 1u << 2,    ///< PI current reference saturated
};

/// One recorded instant of a closed-loop run.
struct Sample {
  double t = 0.0;
  EnergyState x;
  Vec2 v_g = Vec2::Zero();
  Vec2 v_ac = Vec2::Zero();
  Vec2 e = Vec2::Zero();
  Vec2 i_f = Vec2::Zero();
  double v_dc = 0.0;
  double i_conv = 0.0;
  double i_load = 0.0;
  double p_load = 0.0;
  double p_star = 0.0;
  Vec2 i_f_star = Vec2::Zero();
  HamiltonianParts h;
  EnergyRateTerms rates;
  double hdot_c = 0.0;         ///< dH_C/dt
  double hdot_cl = 0.0;        ///< rates.total + hdot_c
  double dissipation_v = 0.0;  ///< k_v e_v^2
  double dissipation_i = 0.0;  ///< K_i |e_i|^2
  double hdot_cl_design = 0.0; ///< supply minus losses minus controller dissipation
  unsigned flags = 0;
};

using Trajectory = std::vector<Sample>;

/// Full-resolution energy trace kept alongside the (decimated) trajectory.
struct EnergySeries {
  std::vector<double> t;
  std::vector<double> h_cl;
  std::vector<double> hdot_cl;
  std::vector<double> hdot_tot;
  std::vector<double> supply;
  std::vector<double> v_dc;

  std::size_t size() const { return t.size(); }
  void reserve(std::size_t n);
};

/// Builds the energy series from recorded samples.
EnergySeries energy_series(const Trajectory& traj);

struct RegulationReport {
  double band_pu = 0.0;
  double max_deviation_pu = 0.0;
  double undershoot_pu = 0.0;   ///< max(0, 1 - min v)
  double overshoot_pu = 0.0;    ///< max(0, max v - 1)
  double reference_time_s = 0.0;  ///< last input event
  std::optional<double> recovery_time_s;  ///< empty when unrecovered
  bool recovered() const { return recovery_time_s.has_value(); }
};

struct EnergyConsistency {
  double max_relative_mismatch = 0.0;  ///< max |fd - analytic| / peak |analytic|
  double max_abs_mismatch = 0.0;
  double peak_rate = 0.0;
  double worst_time_s = 0.0;
  std::size_t points_checked = 0;
  std::vector<std::size_t> flagged;    ///< indices above tol_rel
};

struct PassivityReport {
  std::vector<double> t;
  std::vector<double> hdot_cl;      ///< analytic
  std::vector<double> hdot_cl_fd;   ///< NaN where the stencil is excluded
  std::vector<double> supply;
  std::vector<double> residual;     ///< fd - analytic, NaN where excluded
  std::size_t violations = 0;       ///< steps with hdot_cl > supply + tol
  double violation_fraction = 0.0;
  double max_excess = 0.0;          ///< max(hdot_cl - supply)
  double max_abs_residual = 0.0;
  bool controller_terms = true;
  std::string note;
};

struct RunSummary {
  RegulationReport regulation;
  EnergyConsistency consistency;
  std::size_t passivity_violations = 0;
  double max_supply_excess = 0.0;
  unsigned flags_seen = 0;
};

struct RunResult {
  std::string scenario;
  std::string controller;
  double step_s = 0.0;
  double nominal_v_dc = 0.0;
  double s_base = 0.0;
  Trajectory trajectory;
  EnergySeries series;
  std::vector<double> events;
  std::optional<std::string> failure;
  std::vector<std::string> notices;
  RunSummary summary;
  double wall_time_s = 0.0;

  bool ok() const { return !failure.has_value(); }
};

}  // namespace phdc
