#pragma once

#include <cmath>
#include <string>

namespace phdc {

/// Physical constants of the grid / filter / DC-link plant, all SI.
///
/// The defaults give roughly 5% series reactance and 0.5% series resistance
/// on the (peak phase voltage, S_base) impedance base, a 10 mF DC link and a
/// 98% efficient converter. None of them are measured values.
struct PlantParams {
  double r_g = 0.5e-3;   ///< grid line resistance [ohm]
  double l_g = 5e-6;     ///< grid line inductance [H]
  double r_f = 1.0e-3;   ///< filter resistance [ohm]
  double l_f = 35e-6;    ///< filter inductance [H]
  double c_dc = 10e-3;   ///< DC-link capacitance [F]
  double eta = 0.98;     ///< converter efficiency, (0, 1]
  double v_base_ac = 480.0;  ///< line-to-line rms [V]
  double v_base_dc = 800.0;  ///< [V]
  double s_base = 500e3;     ///< [W]
  double f_nom = 60.0;       ///< [Hz]
  double v_dc_min = 80.0;    ///< guard for divisions by v_dc [V]

  double l_tot() const { return l_g + l_f; }
  double r_tot() const { return r_g + r_f; }
  /// Per-phase peak voltage used as the alpha-beta amplitude.
  double nominal_peak() const { return v_base_ac * std::sqrt(2.0 / 3.0); }
  double omega_nom() const { return 2.0 * M_PI * f_nom; }

  /// Throws ParameterError naming the offending field.
  void validate() const;

  bool operator==(const PlantParams&) const = default;
};

enum class ControllerKind { ph, pi, open };

/// Gains of the passivity-based two-loop controller.
struct PhControllerGains {
  double k_v = 4000.0;    ///< outer-loop damping, enters as k_v / v_dc [A]
  double k_i = 5000.0;    ///< inner-loop damping [1/s]
  double a_v = 0.0;       ///< voltage integral weight
  double m_i = 0.0;       ///< current integral weight, M_i = m_i * I2
  double q_star = 0.0;    ///< reactive power reference [var]
  double tau_d = 300e-6;  ///< time constant of the reference-derivative filter [s]

  void validate() const;
  bool operator==(const PhControllerGains&) const = default;
};

/// Cascaded dq-frame PI baseline.
struct PiControllerGains {
  double kp_v = 0.0;  ///< [A/V]
  double ki_v = 0.0;  ///< [A/(V s)]
  double kp_i = 0.0;  ///< [V/A]
  double ki_i = 0.0;  ///< [V/(A s)]
  double i_limit = 0.0;  ///< d-axis current reference limit [A]

  void validate() const;
  bool operator==(const PiControllerGains&) const = default;
};

/// Technical optimum for the inner loop (pole-zero cancellation of the
/// series RL at `inner_bandwidth` rad/s) and symmetric optimum with ratio
/// `so_ratio` for the outer loop, both on the linearised plant at nominal
/// grid voltage. The current limit is 2 p.u.
PiControllerGains tune_pi(const PlantParams& p, double v_dc_star,
                          double inner_bandwidth = 2000.0, double so_ratio = 3.0);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::ph;
  double v_dc_star = 800.0;  ///< DC voltage reference [V]
  PhControllerGains ph;
  PiControllerGains pi = tune_pi(PlantParams{}, 800.0);

  void validate() const;
  bool operator==(const ControllerConfig&) const = default;
};

const char* to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& name);

}  // namespace phdc
