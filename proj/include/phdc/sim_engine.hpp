#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phdc/errors.hpp"
#include "phdc/params.hpp"
#include "phdc/plant.hpp"
#include "phdc/trajectory.hpp"

namespace phdc {

enum class InitialMode { equilibrium, cold, explicit_state };

enum class LoadSource { steps, csv, synthetic };

/// Parameters of the seeded stand-in for a measured OCP rack profile:
/// random levels held for a random time, joined by short linear ramps.
struct SyntheticLoadSpec {
  double min_pu = 0.3;
  double max_pu = 1.0;
  double hold_min_s = 0.02;
  double hold_max_s = 0.08;
  double ramp_min_s = 1e-3;
  double ramp_max_s = 2e-3;

  bool operator==(const SyntheticLoadSpec&) const = default;
};

/// How the load profile was specified. The resolved profile lives in
/// Scenario::load; this is kept so a scenario can be written back out.
struct LoadSpec {
  LoadSource source = LoadSource::steps;
  std::vector<LoadPoint> steps{{0.0, 1.0}};
  Interpolation interpolation = Interpolation::zero_order_hold;
  std::string csv_path;
  SyntheticLoadSpec synthetic;

  bool operator==(const LoadSpec&) const = default;
};

struct OutputSpec {
  std::string dir = "out";
  bool plots = true;
  bool csv = true;

  bool operator==(const OutputSpec&) const = default;
};

/// Thresholds used by `--check`.
struct CheckSpec {
  double band_pu = 0.02;           ///< max |v_dc - 1| allowed at any time
  double recovery_band_pu = 0.005; ///< band that must be re-entered after the last event
  double recovery_window_s = 0.2;  ///< ... within this long

  bool operator==(const CheckSpec&) const = default;
};

struct Scenario {
  std::string name = "custom";
  double duration_s = 2.0;
  double step_s = 10e-6;
  int decimation = 10;
  InitialMode initial = InitialMode::equilibrium;
  Vec2 i0 = Vec2::Zero();  ///< explicit initial series current [A]
  double v_dc0 = 800.0;    ///< explicit initial DC voltage [V]
  std::uint64_t seed = 1;
  PlantParams plant;
  ControllerConfig controller;
  GridProfile grid;
  LoadSpec load_spec;
  LoadProfile load = LoadProfile::constant(1.0, 500e3);
  OutputSpec output;
  CheckSpec check;

  /// Throws ScenarioError / ParameterError describing the first violation.
  void validate() const;
  /// Number of integration steps; duration is rounded to a whole number of steps.
  std::int64_t steps() const;
  /// Grid and load breakpoints inside (0, duration), sorted.
  std::vector<double> event_times() const;

  bool operator==(const Scenario&) const = default;
};

/// Layout of the closed-loop state vector.
namespace slot {
inline constexpr int phi = 0;      // 2
inline constexpr int q_dc = 2;
inline constexpr int zeta_v = 3;
inline constexpr int zeta_i = 4;   // 2
inline constexpr int ref_filter = 6;  // 2
inline constexpr int pi_v = 8;
inline constexpr int pi_i = 9;     // 2
inline constexpr int size = 11;
}  // namespace slot

using ClosedLoopState = Eigen::Matrix<double, slot::size, 1>;

EnergyState energy_state(const ClosedLoopState& x);

inline bool all_finite(double v) { return std::isfinite(v); }

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

/// One classical RK4 step given the derivative at the start of the step.
template <class State, class F>
State rk4_step(F&& f, const State& x, double t, double h, const State& k1) {
  const State k2 = f(t + 0.5 * h, State(x + (0.5 * h) * k1));
  const State k3 = f(t + 0.5 * h, State(x + (0.5 * h) * k2));
  const State k4 = f(t + h, State(x + h * k3));
  State next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!all_finite(next)) throw IntegrationError("non-finite state after RK4 step", t);
  return next;
}

/// One classical RK4 step. Throws IntegrationError (carrying t, the time of
/// the last good state) if the update is not finite.
template <class State, class F>
State rk4_step(F&& f, const State& x, double t, double h) {
  const State k1 = f(t, x);
  return rk4_step(f, x, t, h, k1);
}

/// Closed-loop right-hand side for a scenario: plant, selected controller
/// and the algebraic solve for the internal AC node voltage.
class ClosedLoop {
 public:
  explicit ClosedLoop(const Scenario& s);

  ClosedLoopState derivative(double t, const ClosedLoopState& x) const;
  /// Same as derivative() and fills every recorded quantity in `out`.
  ClosedLoopState evaluate(double t, const ClosedLoopState& x, Sample& out) const;

  /// Iterations used by the most recent algebraic solve (diagnostics).
  int last_iterations() const { return last_iterations_; }

 private:
  struct Solved;
  Solved solve(double t, const ClosedLoopState& x) const;

  const Scenario& s_;
  mutable int last_iterations_ = 0;
};

struct Initialization {
  ClosedLoopState x = ClosedLoopState::Zero();
  bool converged = false;
  int iterations = 0;
  double residual_pu = 0.0;  ///< max-norm of the rotating-frame derivative
  std::string notice;        ///< set when falling back to a cold start
};

/// Periodic steady state for the inputs at t = 0 found by Newton iteration
/// in the grid-synchronous frame. Falls back to a cold start (zero current,
/// v_dc = v_dc*) with a notice when it does not converge in 100 iterations.
Initialization equilibrium_initializer(const Scenario& s);

/// Integrates the scenario. Guard trips and integration failures end the run
/// early; the partial result carries the reason in `failure`.
RunResult run_scenario(const Scenario& s);

/// Runs independent scenarios on a pool of `workers` threads (0 = hardware
/// concurrency). Results are returned in input order.
std::vector<RunResult> run_sweep(const std::vector<Scenario>& scenarios, unsigned workers = 0);

const char* to_string(InitialMode m);
InitialMode initial_mode_from_string(const std::string& s);
const char* to_string(LoadSource s);
LoadSource load_source_from_string(const std::string& s);
const char* to_string(Interpolation m);
Interpolation interpolation_from_string(const std::string& s);

}  // namespace phdc
