#include "phdc/params.hpp"

#include <sstream>

#include "phdc/errors.hpp"

namespace phdc {
namespace {

void require(bool ok, const char* field, const char* rule, double value) {
  if (ok) return;
  std::ostringstream os;
  os << field << " must be " << rule << " (got " << value << ")";
  throw ParameterError(os.str());
}

}  // namespace

void PlantParams::validate() const {
  require(std::isfinite(l_g) && l_g > 0.0, "l_g", "> 0", l_g);
  require(std::isfinite(l_f) && l_f > 0.0, "l_f", "> 0", l_f);
  require(std::isfinite(c_dc) && c_dc > 0.0, "c_dc", "> 0", c_dc);
  require(std::isfinite(r_g) && r_g >= 0.0, "r_g", ">= 0", r_g);
  require(std::isfinite(r_f) && r_f >= 0.0, "r_f", ">= 0", r_f);
  require(eta > 0.0 && eta <= 1.0, "eta", "in (0, 1]", eta);
  require(std::isfinite(v_base_ac) && v_base_ac > 0.0, "v_base_ac", "> 0", v_base_ac);
  require(std::isfinite(v_base_dc) && v_base_dc > 0.0, "v_base_dc", "> 0", v_base_dc);
  require(std::isfinite(s_base) && s_base > 0.0, "s_base", "> 0", s_base);
  require(std::isfinite(f_nom) && f_nom > 0.0, "f_nom", "> 0", f_nom);
  require(std::isfinite(v_dc_min) && v_dc_min > 0.0, "v_dc_min", "> 0", v_dc_min);
}

void PhControllerGains::validate() const {
  require(k_v > 0.0 && std::isfinite(k_v), "k_v", "> 0", k_v);
  require(k_i > 0.0 && std::isfinite(k_i), "k_i", "> 0", k_i);
  require(a_v >= 0.0 && std::isfinite(a_v), "a_v", ">= 0", a_v);
  require(m_i >= 0.0 && std::isfinite(m_i), "m_i", ">= 0", m_i);
  require(std::isfinite(q_star), "q_star", "finite", q_star);
  require(tau_d > 0.0 && std::isfinite(tau_d), "tau_d", "> 0", tau_d);
}

void PiControllerGains::validate() const {
  require(kp_v >= 0.0, "kp_v", ">= 0", kp_v);
  require(ki_v >= 0.0, "ki_v", ">= 0", ki_v);
  require(kp_i >= 0.0, "kp_i", ">= 0", kp_i);
  require(ki_i >= 0.0, "ki_i", ">= 0", ki_i);
  require(i_limit > 0.0, "i_limit", "> 0", i_limit);
}

PiControllerGains tune_pi(const PlantParams& p, double v_dc_star, double inner_bandwidth,
                          double so_ratio) {
  PiControllerGains g;
  g.kp_i = p.l_tot() * inner_bandwidth;
  g.ki_i = p.r_tot() * inner_bandwidth;
  // Outer plant: i_d -> v_dc is an integrator with gain eta * V_peak / (C v*),
  // in series with the closed inner loop 1 / (1 + s T).
  const double t_inner = 1.0 / inner_bandwidth;
  const double k_plant = p.eta * p.nominal_peak() / (p.c_dc * v_dc_star);
  g.kp_v = 1.0 / (so_ratio * k_plant * t_inner);
  g.ki_v = g.kp_v / (so_ratio * so_ratio * t_inner);
  g.i_limit = 2.0 * p.s_base / p.nominal_peak();
  return g;
}

void ControllerConfig::validate() const {
  require(v_dc_star > 0.0 && std::isfinite(v_dc_star), "v_dc_star", "> 0", v_dc_star);
  switch (kind) {
    case ControllerKind::ph:
      ph.validate();
      break;
    case ControllerKind::pi:
      pi.validate();
      break;
    case ControllerKind::open:
      break;
  }
}

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::ph:
      return "ph";
    case ControllerKind::pi:
      return "pi";
    case ControllerKind::open:
      return "open";
  }
  return "?";
}

ControllerKind controller_kind_from_string(const std::string& name) {
  if (name == "ph") return ControllerKind::ph;
  if (name == "pi") return ControllerKind::pi;
  if (name == "open") return ControllerKind::open;
  throw ParameterError("unknown controller kind '" + name + "' (expected ph, pi or open)");
}

}  // namespace phdc
