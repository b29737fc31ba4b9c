#pragma once

#include "pcdyn/forces.hpp"
#include "pcdyn/manifold.hpp"
#include "pcdyn/params.hpp"
#include "pcdyn/state.hpp"

#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace pcdyn {

enum class Method { Rk4, Rk45 };

std::string_view method_name(Method m);
/// Accepts "rk4" and "rk45".
Method parse_method(std::string_view name);

struct StepperConfig {
  Method method = Method::Rk45;
  /// Fixed step for RK4; initial step for RK45 (0 picks one automatically).
  double step = 0.0;
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  long max_steps = 20'000'000;
  /// DAE step cap: |h| <= kappa eps^{3/2}.
  double kappa = 0.1;
  /// Samples every sample_interval (steps are clipped to land on the grid);
  /// 0 records every accepted step.
  double sample_interval = 0.0;
  /// A DAE run whose |y| exceeds this is stopped as a suspected runaway.
  double runaway_limit = 1e8;

  void validate() const;
};

/// Stops a run when the closest pair gets nearer than min_separation or the
/// widest pair separates beyond escape_radius.
struct CollisionGuard {
  double min_separation = 0.0;
  double escape_radius = std::numeric_limits<double>::infinity();

  void validate() const;
  /// (C_*/4, 10 C^*) from the regularization bands.
  static CollisionGuard from_regularization(const Regularization& reg);
};

enum class Termination { Completed, Collision, Escape, SolverFailure, RunawaySuspected };

std::string_view termination_name(Termination t);

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
  double smallest_step = 0.0;
  double largest_step = 0.0;
};

/// Sampled solution. Each state is packed [r, u] or, for the third-order
/// system, [r, u, y]; derivatives hold the right-hand side at the sample.
struct Trajectory {
  Model model = Model::Coulomb;
  int n = 0;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> derivatives;
  std::vector<double> constraint_residuals;  // zero for second-order models
  Termination termination = Termination::Completed;
  std::string message;
  StepStats stats;
  /// Third-order runs started on the manifold: |phase(0) - requested initial phase|.
  double initial_defect = 0.0;

  bool has_fast_variable() const { return model == Model::ThirdOrder; }
  std::size_t size() const { return times.size(); }
  PhaseState phase(std::size_t i) const;
  DAEState dae(std::size_t i) const;
  Vector accel(std::size_t i) const { return derivatives[i].segment(3 * n, 3 * n); }
  Vec3 fast(std::size_t i) const { return states[i].segment<3>(6 * n); }
};

/// Integrates one of the second-order models from s0.t to t_end (either direction).
Trajectory integrate_model(Model model, const PhaseState& s0, const ParticleSystem& sys, double eps, double t_end,
                           const StepperConfig& cfg, const CollisionGuard& guard);

/// Integrates the third-order system from s0 as given (no manifold projection).
Trajectory integrate_dae(const DAEState& s0, const ParticleSystem& sys, double eps, double t_end,
                         const StepperConfig& cfg, const CollisionGuard& guard, const Regularization& reg);

struct OnManifoldConfig {
  /// Backward-run length beyond t_end, in units of the inverse runaway rate.
  double pad_efolds = 40.0;
  int refine_steps = 1;
  /// Corrections of the predictor's initial data so the returned run starts at s0.
  int shooting_iterations = 0;
};

/// Third-order solution near the slow manifold through s0.
///
/// The manifold repels forward in time, so the run is made backward, where
/// it attracts: a reduced-model predictor supplies the phase state slightly
/// beyond t_end, y is set by manifold_init there, and the system is
/// integrated back to s0.t. Samples are returned in increasing time.
Trajectory integrate_on_manifold(const PhaseState& s0, const ParticleSystem& sys, double eps, double t_end,
                                 const StepperConfig& cfg, const CollisionGuard& guard, const Regularization& reg,
                                 const OnManifoldConfig& mcfg = {});

/// Cubic Hermite interpolation of the packed states at the given times.
std::vector<Vector> resample(const Trajectory& traj, const std::vector<double>& times);
/// Local cubic Lagrange interpolation of the stored derivatives.
std::vector<Vector> resample_derivatives(const Trajectory& traj, const std::vector<double>& times);

}  // namespace pcdyn
