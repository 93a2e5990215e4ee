#pragma once

#include "phdc/ph_core.hpp"

namespace phdc {

/// Quarter-turn rotation used for the reactive projection.
inline Eigen::Matrix2d quarter_turn() {
  Eigen::Matrix2d j;
  j << 0.0, -1.0, 1.0, 0.0;
  return j;
}

inline Eigen::Matrix2d rotation(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

/// Division guard for the current reference: 5% of nominal peak.
inline double v_ac_guard(const PlantParams& p) { return 0.05 * p.nominal_peak(); }

/// Energy-shaping DC current command
///   i_conv* = i_load - (k_v / v_dc)(v_dc - v_dc*) - a_v zeta_v / v_dc.
/// Throws SingularityError when v_dc < v_dc_min.
double outer_voltage_loop(double v_dc, double v_dc_star, double i_load, double k_v,
                          double v_dc_min, double a_v = 0.0, double zeta_v = 0.0);

/// Current reference from instantaneous active / reactive projections onto
/// v_ac and its quarter-turn. Throws GridCollapseError when |v_ac| < v_ac_min.
Vec2 dvoc_current_reference(double p_star, double q_star, const Vec2& v_ac, double v_ac_min);

/// Damping-injection converter voltage
///   e = v_ac - L_f (di*/dt - K_i (i_f - i*)) - R_f i_f + L_f m_i zeta_i.
Vec2 inner_current_loop(const Vec2& i_f, const Vec2& i_f_star, const Vec2& di_f_star_dt,
                        const Vec2& v_ac, double r_f, double l_f, double k_i, double m_i = 0.0,
                        const Vec2& zeta_i = Vec2::Zero());

struct Measurements {
  double v_dc = 0.0;
  Vec2 v_ac = Vec2::Zero();
  Vec2 i_f = Vec2::Zero();
  double i_load = 0.0;
};

struct PhControllerState {
  double zeta_v = 0.0;
  Vec2 zeta_i = Vec2::Zero();
  Vec2 ref_filter = Vec2::Zero();  ///< low-passed copy of i_f*
};

struct PhControllerOutput {
  Vec2 e = Vec2::Zero();
  Vec2 i_f_star = Vec2::Zero();
  Vec2 di_f_star_dt = Vec2::Zero();
  double i_conv_star = 0.0;
  double p_star = 0.0;
  double d_zeta_v = 0.0;
  Vec2 d_zeta_i = Vec2::Zero();
  Vec2 d_ref_filter = Vec2::Zero();
  double tau_dc = 0.0;            ///< -k_v e_v - a_v zeta_v
  Vec2 tau_ac = Vec2::Zero();     ///< -K_i e_i - M_i zeta_i
  double dissipation_v = 0.0;     ///< k_v e_v^2
  double dissipation_i = 0.0;     ///< K_i |e_i|^2
};

/// Outer loop -> p* -> current reference -> filtered derivative -> inner
/// loop. The derivative of i_f* is (i_f* - z) / tau_d with dz/dt equal to
/// the same quantity, i.e. a first-order filtered differentiator.
PhControllerOutput ph_controller_step(const Measurements& m, const PhControllerState& s,
                                      const PhControllerGains& g, double v_dc_star,
                                      const PlantParams& p);

/// Power balance of the controller storage written on its incremental
/// ports (e_v, tau_dc) and (e_i, tau_ac):
///   dH_C/dt + e_v tau_dc + e_i^T tau_ac = -k_v e_v^2 - K_i |e_i|^2.
struct ControllerPowerBalance {
  double storage_rate = 0.0;  ///< dH_C/dt
  double port_power = 0.0;    ///< e_v tau_dc + e_i^T tau_ac
  double dissipation = 0.0;   ///< k_v e_v^2 + K_i |e_i|^2 (>= 0)
};

ControllerPowerBalance controller_power_balance(const PhControllerState& s,
                                                const PhControllerOutput& out,
                                                const PhControllerGains& g, double e_v,
                                                const Vec2& e_i);

struct PiControllerState {
  double v_integral = 0.0;          ///< outer integrator, d-axis current [A]
  Vec2 i_integral = Vec2::Zero();   ///< inner integrators, dq voltage [V]
};

struct PiControllerOutput {
  Vec2 e = Vec2::Zero();
  Vec2 i_dq_star = Vec2::Zero();
  Vec2 i_f_star = Vec2::Zero();   ///< reference rotated back to alpha-beta
  double p_star = 0.0;
  double d_v_integral = 0.0;
  Vec2 d_i_integral = Vec2::Zero();
  bool limited = false;
};

/// Cascaded PI in the grid-angle dq frame. The angle and its rate come from
/// the grid profile directly; no PLL is modelled. The d-axis reference is
/// clamped to i_limit and the outer integrator is frozen while clamped.
PiControllerOutput pi_controller_step(const Measurements& m, const PiControllerState& s,
                                      const PiControllerGains& g, double v_dc_star,
                                      double theta, double omega, const PlantParams& p);

}  // namespace phdc
