#include "phdc/controllers.hpp"

#include <sstream>

#include "phdc/errors.hpp"

namespace phdc {

double outer_voltage_loop(double v_dc, double v_dc_star, double i_load, double k_v,
                          double v_dc_min, double a_v, double zeta_v) {
  if (!(v_dc >= v_dc_min)) {
    std::ostringstream os;
    os << "outer loop: v_dc = " << v_dc << " V is below the guard " << v_dc_min << " V";
    throw SingularityError(os.str());
  }
  return i_load - (k_v / v_dc) * (v_dc - v_dc_star) - a_v * zeta_v / v_dc;
}

Vec2 dvoc_current_reference(double p_star, double q_star, const Vec2& v_ac, double v_ac_min) {
  const double v2 = v_ac.squaredNorm();
  if (!(v2 >= v_ac_min * v_ac_min)) {
    std::ostringstream os;
    os << "grid collapse: |v_ac| = " << std::sqrt(v2) << " V is below the guard " << v_ac_min
       << " V";
    throw GridCollapseError(os.str());
  }
  return (p_star / v2) * v_ac + (q_star / v2) * (quarter_turn() * v_ac);
}

Vec2 inner_current_loop(const Vec2& i_f, const Vec2& i_f_star, const Vec2& di_f_star_dt,
                        const Vec2& v_ac, double r_f, double l_f, double k_i, double m_i,
                        const Vec2& zeta_i) {
  const Vec2 e_i = i_f - i_f_star;
  return v_ac - l_f * (di_f_star_dt - k_i * e_i) - r_f * i_f + l_f * m_i * zeta_i;
}

PhControllerOutput ph_controller_step(const Measurements& m, const PhControllerState& s,
                                      const PhControllerGains& g, double v_dc_star,
                                      const PlantParams& p) {
  PhControllerOutput out;
  const double e_v = m.v_dc - v_dc_star;
  out.i_conv_star = outer_voltage_loop(m.v_dc, v_dc_star, m.i_load, g.k_v, p.v_dc_min, g.a_v,
                                       s.zeta_v);
  // AC terminal power needed to deliver i_conv* after conversion losses.
  out.p_star = m.v_dc * out.i_conv_star / p.eta;
  out.i_f_star = dvoc_current_reference(out.p_star, g.q_star, m.v_ac, v_ac_guard(p));
  out.di_f_star_dt = (out.i_f_star - s.ref_filter) / g.tau_d;
  out.e = inner_current_loop(m.i_f, out.i_f_star, out.di_f_star_dt, m.v_ac, p.r_f, p.l_f, g.k_i,
                             g.m_i, s.zeta_i);

  const Vec2 e_i = m.i_f - out.i_f_star;
  out.d_zeta_v = e_v;
  out.d_zeta_i = e_i;
  out.d_ref_filter = out.di_f_star_dt;
  out.tau_dc = -g.k_v * e_v - g.a_v * s.zeta_v;
  out.tau_ac = -g.k_i * e_i - g.m_i * s.zeta_i;
  out.dissipation_v = g.k_v * e_v * e_v;
  out.dissipation_i = g.k_i * e_i.squaredNorm();
  return out;
}

ControllerPowerBalance controller_power_balance(const PhControllerState& s,
                                                const PhControllerOutput& out,
                                                const PhControllerGains& g, double e_v,
                                                const Vec2& e_i) {
  ControllerPowerBalance b;
  b.storage_rate = g.a_v * s.zeta_v * out.d_zeta_v + g.m_i * s.zeta_i.dot(out.d_zeta_i);
  b.port_power = e_v * out.tau_dc + e_i.dot(out.tau_ac);
  b.dissipation = g.k_v * e_v * e_v + g.k_i * e_i.squaredNorm();
  return b;
}

PiControllerOutput pi_controller_step(const Measurements& m, const PiControllerState& s,
                                      const PiControllerGains& g, double v_dc_star,
                                      double theta, double omega, const PlantParams& p) {
  PiControllerOutput out;
  const Eigen::Matrix2d to_ab = rotation(theta);
  const Eigen::Matrix2d to_dq = to_ab.transpose();

  const double err_v = v_dc_star - m.v_dc;
  double i_d_star = g.kp_v * err_v + s.v_integral;
  out.d_v_integral = g.ki_v * err_v;
  if (std::abs(i_d_star) > g.i_limit) {
    i_d_star = std::copysign(g.i_limit, i_d_star);
    out.d_v_integral = 0.0;
    out.limited = true;
  }
  out.i_dq_star = Vec2(i_d_star, 0.0);

  const Vec2 i_dq = to_dq * m.i_f;
  const Vec2 v_dq = to_dq * m.v_ac;
  const Vec2 err_i = out.i_dq_star - i_dq;
  out.d_i_integral = g.ki_i * err_i;
  const Vec2 u = g.kp_i * err_i + s.i_integral;
  const Vec2 e_dq = v_dq - omega * p.l_f * (quarter_turn() * i_dq) - u;

  out.e = to_ab * e_dq;
  out.i_f_star = to_ab * out.i_dq_star;
  out.p_star = m.v_ac.dot(out.i_f_star);
  return out;
}

}  // namespace phdc
