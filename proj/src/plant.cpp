#include "phdc/plant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phdc/errors.hpp"

namespace phdc {

GridProfile::GridProfile() : GridProfile({GridSegment{}}) {}

GridProfile::GridProfile(std::vector<GridSegment> segments, double end_s)
    : segments_(std::move(segments)), end_s_(end_s) {
  validate();
  start_angle_.resize(segments_.size(), 0.0);
  for (std::size_t k = 1; k < segments_.size(); ++k) {
    const auto& prev = segments_[k - 1];
    start_angle_[k] = start_angle_[k - 1] +
                      2.0 * M_PI * prev.frequency_hz * (segments_[k].start_s - prev.start_s);
  }
}

GridProfile GridProfile::constant(double frequency_hz, double amplitude_pu) {
  return GridProfile({GridSegment{0.0, amplitude_pu, frequency_hz, 0.0}});
}

void GridProfile::validate() const {
  if (segments_.empty()) throw ScenarioError("grid profile needs at least one segment");
  if (segments_.front().start_s != 0.0) {
    throw ScenarioError("first grid segment must start at t = 0");
  }
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const auto& s = segments_[k];
    std::ostringstream where;
    where << "grid segment " << k + 1 << ": ";
    if (!std::isfinite(s.start_s) || !std::isfinite(s.amplitude_pu) ||
        !std::isfinite(s.frequency_hz) || !std::isfinite(s.phase_rad)) {
      throw ScenarioError(where.str() + "non-finite value");
    }
    if (s.amplitude_pu < 0.0) throw ScenarioError(where.str() + "amplitude must be >= 0");
    if (s.frequency_hz < 0.0) throw ScenarioError(where.str() + "frequency must be >= 0");
    if (k > 0 && !(s.start_s > segments_[k - 1].start_s)) {
      throw ScenarioError(where.str() + "start times must be strictly increasing");
    }
  }
}

GridProfile::Sample GridProfile::sample(double t) const {
  // Allow the final RK4 stage to land a rounding error past the end.
  const double slack = 1e-12 * std::max(1.0, std::abs(end_s_));
  if (!(t >= 0.0) || t > end_s_ + slack) {
    std::ostringstream os;
    os << "time " << t << " s is outside the grid profile coverage [0, " << end_s_ << "]";
    throw ScenarioError(os.str());
  }
  const auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](double v, const GridSegment& s) { return v < s.start_s; });
  const auto k = static_cast<std::size_t>(std::distance(segments_.begin(), it)) - 1;
  const auto& s = segments_[k];
  const double omega = 2.0 * M_PI * s.frequency_hz;
  return {s.amplitude_pu, start_angle_[k] + omega * (t - s.start_s) + s.phase_rad, omega};
}

std::vector<double> GridProfile::breakpoints() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < segments_.size(); ++k) out.push_back(segments_[k].start_s);
  return out;
}

LoadProfile::LoadProfile(std::vector<LoadPoint> points, Interpolation mode, double base_w)
    : points_(std::move(points)), mode_(mode), base_w_(base_w) {
  if (points_.empty()) throw LoadError("load profile needs at least one point");
  if (!(base_w_ > 0.0)) throw LoadError("load profile base power must be positive");
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const auto& pt = points_[k];
    std::ostringstream where;
    where << "load point " << k + 1 << ": ";
    if (!std::isfinite(pt.time_s) || !std::isfinite(pt.power_pu)) {
      throw LoadError(where.str() + "non-finite value");
    }
    if (pt.power_pu < 0.0) throw LoadError(where.str() + "power must be >= 0");
    if (k > 0 && !(pt.time_s > points_[k - 1].time_s)) {
      throw LoadError(where.str() + "time must be strictly increasing");
    }
  }
}

LoadProfile LoadProfile::constant(double power_pu, double base_w) {
  return LoadProfile({LoadPoint{0.0, power_pu}}, Interpolation::zero_order_hold, base_w);
}

double LoadProfile::power_pu(double t) const {
  if (points_.empty()) return 0.0;
  const auto it = std::upper_bound(points_.begin(), points_.end(), t,
                                   [](double v, const LoadPoint& p) { return v < p.time_s; });
  if (it == points_.begin()) return points_.front().power_pu;
  const auto& left = *(it - 1);
  if (mode_ == Interpolation::zero_order_hold || it == points_.end()) return left.power_pu;
  const auto& right = *it;
  const double w = (t - left.time_s) / (right.time_s - left.time_s);
  return left.power_pu + w * (right.power_pu - left.power_pu);
}

std::vector<double> LoadProfile::breakpoints() const {
  std::vector<double> out;
  for (const auto& p : points_) {
    if (p.time_s > 0.0) out.push_back(p.time_s);
  }
  return out;
}

Vec2 grid_voltage(double t, const GridProfile& g, double nominal_peak) {
  const auto s = g.sample(t);
  return s.amplitude_pu * nominal_peak * Vec2(std::cos(s.angle_rad), std::sin(s.angle_rad));
}

CplCurrent cpl_current(double p_load, double v_dc, double v_dc_min) {
  if (!(p_load >= 0.0)) {
    std::ostringstream os;
    os << "load power must be >= 0 (got " << p_load << " W)";
    throw LoadError(os.str());
  }
  const bool clamped = v_dc < v_dc_min;
  return {p_load / (clamped ? v_dc_min : v_dc), clamped};
}

double cpl_incremental_conductance(double p_load, double v_dc) {
  return -p_load / (v_dc * v_dc);
}

Vec2 ac_node_voltage(const Vec2& phi, const Vec2& e, const Vec2& v_g, const PlantParams& p) {
  const Vec2 i = phi / p.l_tot();
  return v_g - p.r_g * i - (p.l_g / p.l_tot()) * (v_g - e - p.r_tot() * i);
}

double converter_dc_current(const Vec2& e, const Vec2& i_f, double v_dc, double eta,
                            double v_dc_min) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    std::ostringstream os;
    os << "eta must be in (0, 1] (got " << eta << ")";
    throw ParameterError(os.str());
  }
  const double v = std::max(v_dc, v_dc_min);
  const double p_ac = e.dot(i_f);
  return p_ac >= 0.0 ? eta * p_ac / v : p_ac / (eta * v);
}

PlantDerivative plant_derivatives(const EnergyState& x, const Vec2& e, double p_load,
                                  const GridProfile& g, double t, const PlantParams& p) {
  PlantDerivative d;
  d.v_dc = x.q_dc / p.c_dc;
  d.i = x.phi / p.l_tot();
  d.v_g = grid_voltage(t, g, p.nominal_peak());
  d.d_phi = d.v_g - e - p.r_tot() * d.i;
  const auto load = cpl_current(p_load, d.v_dc, p.v_dc_min);
  d.i_load = load.current;
  d.cpl_clamped = load.clamped;
  d.conv_clamped = d.v_dc < p.v_dc_min;
  d.i_conv = converter_dc_current(e, d.i, d.v_dc, p.eta, p.v_dc_min);
  d.d_q_dc = d.i_conv - d.i_load;
  return d;
}

}  // namespace phdc
