#pragma once

#include <limits>
#include <vector>

#include "phdc/ph_core.hpp"

namespace phdc {

struct GridSegment {
  double start_s = 0.0;
  double amplitude_pu = 1.0;  ///< multiplier of the nominal peak
  double frequency_hz = 60.0;
  double phase_rad = 0.0;     ///< offset added on top of the continuous angle

  bool operator==(const GridSegment&) const = default;
};

/// Piecewise grid voltage description. The angle integrates 2 pi f across
/// segment boundaries, so amplitude or frequency changes keep it continuous.
class GridProfile {
 public:
  GridProfile();
  explicit GridProfile(std::vector<GridSegment> segments,
                       double end_s = std::numeric_limits<double>::infinity());

  /// Ideal 60 Hz grid at unit amplitude.
  static GridProfile constant(double frequency_hz = 60.0, double amplitude_pu = 1.0);

  struct Sample {
    double amplitude_pu;
    double angle_rad;
    double omega_rad_s;
  };

  /// Throws ScenarioError for t outside [0, end].
  Sample sample(double t) const;

  const std::vector<GridSegment>& segments() const { return segments_; }
  double end_s() const { return end_s_; }
  void set_end(double end_s) { end_s_ = end_s; }
  /// Segment start times after t = 0.
  std::vector<double> breakpoints() const;

  bool operator==(const GridProfile& o) const {
    return segments_ == o.segments_;
  }

 private:
  void validate() const;

  std::vector<GridSegment> segments_;
  std::vector<double> start_angle_;
  double end_s_;
};

enum class Interpolation { zero_order_hold, linear };

struct LoadPoint {
  double time_s = 0.0;
  double power_pu = 0.0;

  bool operator==(const LoadPoint&) const = default;
};

/// Demanded CPL power versus time, stored in p.u. of `base_w`.
/// Before the first point and after the last the end values are held.
class LoadProfile {
 public:
  LoadProfile() = default;
  LoadProfile(std::vector<LoadPoint> points, Interpolation mode, double base_w);

  static LoadProfile constant(double power_pu, double base_w);

  double power_pu(double t) const;
  double power_w(double t) const { return power_pu(t) * base_w_; }

  const std::vector<LoadPoint>& points() const { return points_; }
  Interpolation interpolation() const { return mode_; }
  double base_w() const { return base_w_; }
  /// Times after t = 0 where the profile (ZOH) or its slope (linear) may jump.
  std::vector<double> breakpoints() const;

  bool operator==(const LoadProfile&) const = default;

 private:
  std::vector<LoadPoint> points_;
  Interpolation mode_ = Interpolation::zero_order_hold;
  double base_w_ = 1.0;
};

Vec2 grid_voltage(double t, const GridProfile& g, double nominal_peak);

struct CplCurrent {
  double current = 0.0;
  bool clamped = false;
};

/// i_load = P / max(v_dc, v_dc_min). Throws LoadError for P < 0.
CplCurrent cpl_current(double p_load, double v_dc, double v_dc_min);

/// Incremental conductance d i_load / d v_dc of the CPL.
double cpl_incremental_conductance(double p_load, double v_dc);

/// Internal AC node voltage of the lumped series branch: satisfies the grid
/// KVL and the filter KVL with the shared current phi / L_tot.
Vec2 ac_node_voltage(const Vec2& phi, const Vec2& e, const Vec2& v_g, const PlantParams& p);

/// DC current delivered by the converter for terminal power p = e^T i_f.
/// Rectifying (p >= 0): v_dc i_conv = eta p. Inverting: v_dc i_conv = p / eta.
/// Throws ParameterError for eta outside (0, 1].
double converter_dc_current(const Vec2& e, const Vec2& i_f, double v_dc, double eta,
                            double v_dc_min);

struct PlantDerivative {
  Vec2 d_phi = Vec2::Zero();
  double d_q_dc = 0.0;
  Vec2 v_g = Vec2::Zero();
  Vec2 i = Vec2::Zero();
  double v_dc = 0.0;
  double i_conv = 0.0;
  double i_load = 0.0;
  bool cpl_clamped = false;
  bool conv_clamped = false;
};

PlantDerivative plant_derivatives(const EnergyState& x, const Vec2& e, double p_load,
                                  const GridProfile& g, double t, const PlantParams& p);

}  // namespace phdc
