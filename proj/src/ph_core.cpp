#include "phdc/ph_core.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

#include "phdc/errors.hpp"
#include "phdc/plant.hpp"

namespace phdc {

StructureReport validate_structure(const PhStructure& s, double tol_psd) {
  const auto n = s.J.rows();
  if (n == 0 || s.J.cols() != n || s.R.rows() != n || s.R.cols() != n ||
      (s.G.size() != 0 && s.G.rows() != n)) {
    std::ostringstream os;
    os << "inconsistent structure dimensions: J " << s.J.rows() << "x" << s.J.cols() << ", R "
       << s.R.rows() << "x" << s.R.cols() << ", G " << s.G.rows() << "x" << s.G.cols();
    throw StructuralError(os.str());
  }

  StructureReport r;
  r.skew_defect = (s.J + s.J.transpose()).cwiseAbs().maxCoeff();
  const Eigen::MatrixXd sym = 0.5 * (s.R + s.R.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = eig.eigenvalues().minCoeff();
  r.passed = r.skew_defect <= tol_psd && r.min_eigenvalue >= -tol_psd;
  return r;
}

HamiltonianParts hamiltonian_total(const EnergyState& x, const PlantParams& p,
                                   const PhControllerGains& c) {
  if (!(p.l_g > 0.0) || !(p.l_f > 0.0) || !(p.c_dc > 0.0)) {
    throw ParameterError("inductances and capacitance must be positive");
  }
  HamiltonianParts h;
  h.g_plus_p = x.phi.squaredNorm() / (2.0 * p.l_tot());
  h.dc = x.q_dc * x.q_dc / (2.0 * p.c_dc);
  h.controller = 0.5 * c.a_v * x.zeta_v * x.zeta_v + 0.5 * c.m_i * x.zeta_i.squaredNorm();
  h.total = h.g_plus_p + h.dc + h.controller;
  return h;
}

EnergyGradient hamiltonian_gradient(const EnergyState& x, const PlantParams& p,
                                    const PhControllerGains& c) {
  return {x.phi / p.l_tot(), x.q_dc / p.c_dc, c.a_v * x.zeta_v, c.m_i * x.zeta_i};
}

EnergyRateTerms energy_rate_analytic(const EnergyState& x, const PlantInputs& in,
                                     const PlantParams& p) {
  const double v_dc = x.q_dc / p.c_dc;
  if (!(v_dc >= p.v_dc_min)) {
    std::ostringstream os;
    os << "v_dc = " << v_dc << " V is below the guard " << p.v_dc_min << " V";
    throw SingularityError(os.str());
  }
  const Vec2 i = x.phi / p.l_tot();
  const double i2 = i.squaredNorm();
  const double i_conv = converter_dc_current(in.e, i, v_dc, p.eta, p.v_dc_min);
  const double i_load = cpl_current(in.p_load, v_dc, p.v_dc_min).current;

  EnergyRateTerms r;
  r.supply = in.v_g.dot(i);
  r.line_loss = p.r_g * i2;
  r.filter_loss = p.r_f * i2;
  r.converter_loss = in.e.dot(i) - v_dc * i_conv;
  r.load = v_dc * i_load;
  r.total = r.supply - r.line_loss - r.filter_loss - r.converter_loss - r.load;
  return r;
}

}  // namespace phdc
