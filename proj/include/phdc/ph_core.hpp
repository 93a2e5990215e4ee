#pragma once

#include <Eigen/Dense>

#include "phdc/params.hpp"

namespace phdc {

using Vec2 = Eigen::Vector2d;

inline constexpr double kDefaultTolPsd = 1e-9;

/// Structure matrices of dx/dt = (J - R) grad H + G u.
struct PhStructure {
  Eigen::MatrixXd J;
  Eigen::MatrixXd R;
  Eigen::MatrixXd G;
};

struct StructureReport {
  double skew_defect = 0.0;      ///< ||J + J^T||_inf
  double min_eigenvalue = 0.0;   ///< of (R + R^T) / 2
  bool passed = false;
};

/// Checks J = -J^T and R >= 0. Throws StructuralError on inconsistent
/// dimensions.
StructureReport validate_structure(const PhStructure& s, double tol_psd = kDefaultTolPsd);

/// Energy variables of the closed loop. The grid and filter inductors carry
/// the same current and are lumped into one flux over L_g + L_f.
struct EnergyState {
  Vec2 phi = Vec2::Zero();      ///< series inductor flux [V s]
  double q_dc = 0.0;            ///< DC-link charge [C]
  double zeta_v = 0.0;          ///< voltage-loop integral state [V s]
  Vec2 zeta_i = Vec2::Zero();   ///< current-loop integral state [A s]

  bool operator==(const EnergyState&) const = default;
};

struct HamiltonianParts {
  double g_plus_p = 0.0;   ///< grid + filter magnetic energy [J]
  double dc = 0.0;         ///< DC-link electric energy [J]
  double controller = 0.0; ///< artificial controller energy [J]
  double total = 0.0;      ///< sum of the three
};

/// Stored energy per subsystem. Throws ParameterError unless L, C > 0.
HamiltonianParts hamiltonian_total(const EnergyState& x, const PlantParams& p,
                                   const PhControllerGains& c);

struct PlantInputs {
  Vec2 v_g = Vec2::Zero();
  Vec2 e = Vec2::Zero();
  double p_load = 0.0;
};

/// Decomposition of dH_tot/dt. Dissipative terms are reported as positive
/// powers; `total = supply - line_loss - filter_loss - converter_loss - load`.
struct EnergyRateTerms {
  double supply = 0.0;          ///< v_g^T i
  double line_loss = 0.0;       ///< R_g |i|^2
  double filter_loss = 0.0;     ///< R_f |i|^2
  double converter_loss = 0.0;  ///< e^T i - v_dc i_conv
  double load = 0.0;            ///< v_dc i_load
  double total = 0.0;
};

/// Throws SingularityError when v_dc falls below p.v_dc_min.
EnergyRateTerms energy_rate_analytic(const EnergyState& x, const PlantInputs& in,
                                     const PlantParams& p);

/// Gradient of H_tot + H_C with respect to (phi, q_dc, zeta_v, zeta_i).
struct EnergyGradient {
  Vec2 d_phi;
  double d_q_dc;
  double d_zeta_v;
  Vec2 d_zeta_i;
};

EnergyGradient hamiltonian_gradient(const EnergyState& x, const PlantParams& p,
                                    const PhControllerGains& c);

}  // namespace phdc
