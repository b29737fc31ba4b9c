#include "pcdyn/integrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

namespace pcdyn {

std::string_view method_name(Method m) { return m == Method::Rk4 ? "rk4" : "rk45"; }

Method parse_method(std::string_view name) {
  if (name == "rk4") return Method::Rk4;
  if (name == "rk45") return Method::Rk45;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "' (expected rk4 or rk45)");
}

void StepperConfig::validate() const {
  if (method == Method::Rk4 && !(step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "rk4 needs a positive step");
  }
  if (step < 0.0 || !(abs_tol > 0.0) || !(rel_tol >= 0.0) || max_steps <= 0 || !(kappa > 0.0) ||
      sample_interval < 0.0 || !(runaway_limit > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "stepper configuration has a non-positive step, tolerance or limit");
  }
}

void CollisionGuard::validate() const {
  if (!(min_separation > 0.0) || !(escape_radius > min_separation)) {
    throw Error(ErrorCode::InvalidArgument, "collision guard needs 0 < min_separation < escape_radius");
  }
}

CollisionGuard CollisionGuard::from_regularization(const Regularization& reg) {
  return {reg.c_lower / 4.0, 10.0 * reg.c_upper};
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::Collision: return "collision";
    case Termination::Escape: return "escape";
    case Termination::SolverFailure: return "solver_failure";
    case Termination::RunawaySuspected: return "runaway_suspected";
  }
  return "unknown";
}

PhaseState Trajectory::phase(std::size_t i) const {
  return {times[i], states[i].head(3 * n), states[i].segment(3 * n, 3 * n)};
}

DAEState Trajectory::dae(std::size_t i) const {
  if (!has_fast_variable()) throw Error(ErrorCode::InvalidArgument, "trajectory has no fast variable");
  return {times[i], states[i].head(3 * n), states[i].segment(3 * n, 3 * n), fast(i)};
}

namespace {

using Rhs = std::function<Vector(double, const Vector&, double*)>;

struct Problem {
  Rhs rhs;
  int n = 0;
  bool fast = false;
  double step_cap = std::numeric_limits<double>::infinity();
};

struct GuardMargin {
  double collision = std::numeric_limits<double>::infinity();
  double escape = std::numeric_limits<double>::infinity();
};

GuardMargin guard_margin(const Vector& x, int n, const CollisionGuard& guard) {
  GuardMargin m;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const double d = (x.segment<3>(3 * a) - x.segment<3>(3 * b)).norm();
      m.collision = std::min(m.collision, d - guard.min_separation);
      m.escape = std::min(m.escape, guard.escape_radius - d);
    }
  }
  return m;
}

Vector hermite(const Vector& x0, const Vector& f0, const Vector& x1, const Vector& f1, double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * x1 + (s3 - s2) * h * f1;
}

double rms_scaled(const Vector& v, const Vector& x0, const Vector& x1, const StepperConfig& cfg) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x0[i]), std::abs(x1[i]));
    const double q = v[i] / sc;
    sum += q * q;
  }
  return std::sqrt(sum / static_cast<double>(std::max<Eigen::Index>(v.size(), 1)));
}

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepResult {
  Vector x;
  Vector f;          // rhs at the new point
  double residual = 0.0;
  double error = 0.0;
};

StepResult dp45_step(const Problem& p, double t, const Vector& x, const Vector& k1, double h, long& evals,
                     const StepperConfig& cfg) {
  const Vector k2 = p.rhs(t + h / 5, x + h * a21 * k1, nullptr);
  const Vector k3 = p.rhs(t + 3 * h / 10, x + h * (a31 * k1 + a32 * k2), nullptr);
  const Vector k4 = p.rhs(t + 4 * h / 5, x + h * (a41 * k1 + a42 * k2 + a43 * k3), nullptr);
  const Vector k5 = p.rhs(t + 8 * h / 9, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), nullptr);
  const Vector k6 = p.rhs(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), nullptr);
  StepResult r;
  r.x = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  r.f = p.rhs(t + h, r.x, &r.residual);
  evals += 6;
  const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * r.f);
  r.error = rms_scaled(err, x, r.x, cfg);
  return r;
}

StepResult rk4_step(const Problem& p, double t, const Vector& x, const Vector& k1, double h, long& evals) {
  const Vector k2 = p.rhs(t + h / 2, x + (h / 2) * k1, nullptr);
  const Vector k3 = p.rhs(t + h / 2, x + (h / 2) * k2, nullptr);
  const Vector k4 = p.rhs(t + h, x + h * k3, nullptr);
  StepResult r;
  r.x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  r.f = p.rhs(t + h, r.x, &r.residual);
  evals += 4;
  return r;
}

// Next time the integrator must land on, strictly beyond t in direction dir.
double next_landing(double t, double t1, double dir, double interval, double origin, const std::vector<double>& forced) {
  const double slack = 1e-12 * std::max({1.0, std::abs(t), std::abs(t1)});
  double best = t1;
  const auto consider = [&](double c) {
    if (dir * (c - t) > slack && dir * (best - c) > 0.0) best = c;
  };
  if (interval > 0.0) {
    const double k = std::floor((t - origin) / interval);
    for (double j = k - 1.0; j <= k + 2.0; j += 1.0) consider(origin + j * interval);
  }
  for (double f : forced) consider(f);
  return best;
}

Trajectory run(const Problem& p, Model model, double t0, const Vector& x0, double t1, const StepperConfig& cfg,
               const CollisionGuard& guard, double grid_origin, const std::vector<double>& forced) {
  cfg.validate();
  Trajectory traj;
  traj.model = model;
  traj.n = p.n;
  const auto record = [&](double t, const Vector& x, const Vector& f, double residual) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.derivatives.push_back(f);
    traj.constraint_residuals.push_back(residual);
  };
  const auto stop = [&](Termination why, std::string msg) {
    traj.termination = why;
    traj.message = std::move(msg);
    return traj;
  };

  const GuardMargin start = guard_margin(x0, p.n, guard);
  if (start.collision <= 0.0 || start.escape <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "initial state lies outside the collision guard bounds");
  }

  double t = t0;
  Vector x = x0;
  double residual = 0.0;
  Vector f;
  try {
    f = p.rhs(t, x, &residual);
  } catch (const Error& err) {
    record(t, x, Vector::Zero(x.size()), 0.0);
    return stop(Termination::SolverFailure, err.what());
  }
  long evals = 1;
  record(t, x, f, residual);
  if (t1 == t0) return stop(Termination::Completed, "");

  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double h = cfg.step;
  if (cfg.method == Method::Rk45 && !(h > 0.0)) {
    const double d0 = rms_scaled(x, x, x, cfg);
    const double d1 = rms_scaled(f, x, x, cfg);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  }
  h = std::min({h, span, p.step_cap});
  const bool every_step = !(cfg.sample_interval > 0.0);

  auto finish = [&](Termination why, std::string msg) {
    traj.stats.rhs_evaluations = evals;
    return stop(why, std::move(msg));
  };

  while (true) {
    const double remaining = dir * (t1 - t);
    if (remaining <= 1e-14 * std::max(1.0, std::abs(t1))) break;
    if (traj.stats.accepted + traj.stats.rejected >= cfg.max_steps) {
      return finish(Termination::SolverFailure, "maximum number of steps exceeded");
    }
    const double landing = next_landing(t, t1, dir, cfg.sample_interval, grid_origin, forced);
    const double to_landing = dir * (landing - t);
    double h_try = std::min({h, p.step_cap});
    bool lands = false;
    // Snap onto the landing time when a full step would stop just short of it.
    const double snap = std::max(1e-9 * h_try, 4e-12 * std::max({1.0, std::abs(t), std::abs(t1)}));
    if (h_try >= to_landing - snap) {
      h_try = to_landing;
      lands = true;
    }
    const double underflow = 1e-14 * std::max(1.0, std::abs(t));
    if (h_try < underflow) {
      return finish(p.fast ? Termination::RunawaySuspected : Termination::SolverFailure,
                    "step size underflow at t = " + std::to_string(t));
    }

    StepResult step;
    try {
      step = cfg.method == Method::Rk45 ? dp45_step(p, t, x, f, dir * h_try, evals, cfg)
                                         : rk4_step(p, t, x, f, dir * h_try, evals);
    } catch (const Error& err) {
      if (cfg.method == Method::Rk45 && h_try > 1e3 * underflow) {
        ++traj.stats.rejected;
        h = 0.25 * h_try;
        continue;
      }
      return finish(Termination::SolverFailure, err.what());
    }
    const bool finite = step.x.allFinite() && step.f.allFinite();
    if (cfg.method == Method::Rk45 && (!finite || step.error > 1.0)) {
      ++traj.stats.rejected;
      const double fac = finite ? std::max(0.2, 0.9 * std::pow(step.error, -0.2)) : 0.2;
      h = h_try * fac;
      continue;
    }
    if (!finite) {
      return finish(p.fast ? Termination::RunawaySuspected : Termination::SolverFailure,
                    "non-finite state at t = " + std::to_string(t));
    }

    const double t_new = lands ? landing : t + dir * h_try;
    const GuardMargin margin = guard_margin(step.x, p.n, guard);
    if (margin.collision <= 0.0 || margin.escape <= 0.0) {
      // Bisect the cubic Hermite interpolant for the first guard crossing.
      const bool collided = margin.collision <= 0.0;
      const double hs = t_new - t;
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60 && (hi - lo) * std::abs(hs) > 1e-9 * std::max(1.0, std::abs(t)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto m = guard_margin(hermite(x, f, step.x, step.f, hs, mid), p.n, guard);
        if ((collided ? m.collision : m.escape) <= 0.0) hi = mid; else lo = mid;
      }
      const double tc = t + hi * hs;
      const Vector xc = hermite(x, f, step.x, step.f, hs, hi);
      double rc = 0.0;
      Vector fc;
      try {
        fc = p.rhs(tc, xc, &rc);
      } catch (const Error&) {
        fc = step.f;
      }
      record(tc, xc, fc, rc);
      ++traj.stats.accepted;
      return finish(collided ? Termination::Collision : Termination::Escape,
                    collided ? "pair separation fell below the guard" : "pair separation exceeded the escape radius");
    }

    ++traj.stats.accepted;
    traj.stats.smallest_step = traj.stats.accepted == 1 ? h_try : std::min(traj.stats.smallest_step, h_try);
    traj.stats.largest_step = std::max(traj.stats.largest_step, h_try);
    t = t_new;
    x = std::move(step.x);
    f = std::move(step.f);
    residual = step.residual;
    if (every_step || lands) record(t, x, f, residual);

    if (p.fast && x.tail<3>().norm() > cfg.runaway_limit) {
      if (!(every_step || lands)) record(t, x, f, residual);
      return finish(Termination::RunawaySuspected, "fast variable exceeded the runaway limit");
    }

    if (cfg.method == Method::Rk45) {
      const double fac = step.error > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(step.error, -0.2))) : 5.0;
      const double proposal = h_try * fac;
      h = lands ? std::max(proposal, h) : proposal;
    }
  }
  return finish(Termination::Completed, "");
}

Problem model_problem(Model model, const ParticleSystem& sys, double eps) {
  Problem p;
  p.n = sys.n();
  p.rhs = [model, &sys, eps](double t, const Vector& x, double*) {
    const auto s = unpack_phase(t, x);
    Vector out(x.size());
    out << s.u, model_rhs(model, s, sys, eps);
    return out;
  };
  return p;
}

Problem dae_problem(const ParticleSystem& sys, double eps, const StepperConfig& cfg, const Regularization& reg) {
  Problem p;
  p.n = sys.n();
  p.fast = true;
  p.step_cap = cfg.kappa * std::pow(eps, 1.5);
  p.rhs = [&sys, eps, &reg](double t, const Vector& x, double* residual) {
    const auto s = unpack_dae(t, x);
    const auto ev = third_order_evaluate(s, sys, eps, reg);
    if (residual) *residual = ev.constraint_residual;
    Vector out(x.size());
    out << s.u, ev.accel, ev.ydot;
    return out;
  };
  return p;
}

void check_state(const PhaseState& s, const ParticleSystem& sys) {
  if (s.r.size() != 3 * sys.n() || s.u.size() != 3 * sys.n()) {
    throw Error(ErrorCode::InvalidArgument, "state size does not match particle count");
  }
  if (!s.r.allFinite() || !s.u.allFinite()) throw Error(ErrorCode::InvalidArgument, "state has non-finite entries");
  PairGeometry::from_positions(s.r);
}

}  // namespace

Trajectory integrate_model(Model model, const PhaseState& s0, const ParticleSystem& sys, double eps, double t_end,
                           const StepperConfig& cfg, const CollisionGuard& guard) {
  if (model == Model::ThirdOrder) {
    throw Error(ErrorCode::InvalidArgument, "use integrate_dae or integrate_on_manifold for third_order");
  }
  check_state(s0, sys);
  return run(model_problem(model, sys, eps), model, s0.t, pack(s0), t_end, cfg, guard, s0.t, {});
}

Trajectory integrate_dae(const DAEState& s0, const ParticleSystem& sys, double eps, double t_end,
                         const StepperConfig& cfg, const CollisionGuard& guard, const Regularization& reg) {
  check_state(s0.phase(), sys);
  return run(dae_problem(sys, eps, cfg, reg), Model::ThirdOrder, s0.t, pack(s0), t_end, cfg, guard, s0.t, {});
}

Trajectory integrate_on_manifold(const PhaseState& s0, const ParticleSystem& sys, double eps, double t_end,
                                 const StepperConfig& cfg, const CollisionGuard& guard, const Regularization& reg,
                                 const OnManifoldConfig& mcfg) {
  check_state(s0, sys);
  const double dir = t_end >= s0.t ? 1.0 : -1.0;
  const double pad = mcfg.pad_efolds / runaway_rate_slaved(sys, eps);
  const Vector target = pack(s0);

  PhaseState start = s0;
  Trajectory out;
  for (int iter = 0; iter <= mcfg.shooting_iterations; ++iter) {
    StepperConfig pcfg = cfg;
    pcfg.sample_interval = 0.0;
    const Trajectory pred =
        integrate_model(Model::RrReduced, start, sys, eps, t_end + dir * pad, pcfg, guard);
    double t_far = pred.times.back();
    double t_stop = t_end;
    Termination early = Termination::Completed;
    std::string early_msg;
    if (pred.termination != Termination::Completed) {
      // The backward run can only be trusted up to one pad before the predictor stopped.
      t_stop = t_far - dir * pad;
      early = pred.termination;
      early_msg = "predictor: " + pred.message;
      if (dir * (t_stop - s0.t) <= 0.0) {
        out = pred;
        out.model = Model::ThirdOrder;
        out.times.clear();
        out.states.clear();
        out.derivatives.clear();
        out.constraint_residuals.clear();
        out.message = early_msg;
        out.termination = early;
        return out;
      }
    }
    PhaseState far = pred.phase(pred.size() - 1);
    if (pred.termination != Termination::Completed) {
      // Start slightly inside the predictor's span; its last sample sits on the guard.
      const double t_back = t_far - dir * 0.1 * pad;
      far = unpack_phase(t_back, resample(pred, {t_back}).front());
    }
    const auto init = manifold_init(far, sys, eps, mcfg.refine_steps, reg);
    const DAEState d0{far.t, far.r, far.u, init.y};

    const Trajectory back = run(dae_problem(sys, eps, cfg, reg), Model::ThirdOrder, far.t, pack(d0), s0.t, cfg,
                                guard, s0.t, {t_stop});
    out = Trajectory{};
    out.model = Model::ThirdOrder;
    out.n = sys.n();
    out.stats = back.stats;
    out.stats.rhs_evaluations += pred.stats.rhs_evaluations;
    const double slack = 1e-12 * std::max({1.0, std::abs(t_stop), std::abs(s0.t)});
    for (std::size_t i = back.size(); i-- > 0;) {
      if (dir * (back.times[i] - t_stop) > slack) continue;
      out.times.push_back(back.times[i]);
      out.states.push_back(back.states[i]);
      out.derivatives.push_back(back.derivatives[i]);
      out.constraint_residuals.push_back(back.constraint_residuals[i]);
    }
    if (back.termination != Termination::Completed) {
      out.termination = back.termination;
      out.message = "backward run: " + back.message;
      return out;
    }
    out.termination = early;
    out.message = early_msg;
    if (out.times.empty()) return out;

    const Vector got = out.states.front().head(6 * sys.n());
    out.initial_defect = (got - target).norm();
    if (iter < mcfg.shooting_iterations) {
      const Vector fixed = pack(start) + (target - got);
      start = unpack_phase(s0.t, fixed);
    }
  }
  return out;
}

namespace {

std::size_t locate(const Trajectory& traj, double t) {
  const auto& ts = traj.times;
  if (ts.empty()) throw Error(ErrorCode::OutOfRange, "empty trajectory");
  const double slack = 1e-12 * std::max({1.0, std::abs(ts.front()), std::abs(ts.back())});
  if (t < ts.front() - slack || t > ts.back() + slack) {
    throw Error(ErrorCode::OutOfRange, "time " + std::to_string(t) + " lies outside the trajectory span");
  }
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t i = it == ts.begin() ? 0 : static_cast<std::size_t>(it - ts.begin()) - 1;
  if (i + 1 >= ts.size() && ts.size() >= 2) i = ts.size() - 2;
  return i;
}

}  // namespace

std::vector<Vector> resample(const Trajectory& traj, const std::vector<double>& times) {
  std::vector<Vector> out;
  out.reserve(times.size());
  for (double t : times) {
    const std::size_t i = locate(traj, t);
    if (traj.size() == 1) {
      out.push_back(traj.states[0]);
      continue;
    }
    const double h = traj.times[i + 1] - traj.times[i];
    const double s = (t - traj.times[i]) / h;
    if (s == 0.0) {
      out.push_back(traj.states[i]);
    } else if (s == 1.0) {
      out.push_back(traj.states[i + 1]);
    } else {
      out.push_back(hermite(traj.states[i], traj.derivatives[i], traj.states[i + 1], traj.derivatives[i + 1], h, s));
    }
  }
  return out;
}

std::vector<Vector> resample_derivatives(const Trajectory& traj, const std::vector<double>& times) {
  std::vector<Vector> out;
  out.reserve(times.size());
  const std::size_t m = traj.size();
  for (double t : times) {
    const std::size_t i = locate(traj, t);
    if (m < 4) {
      out.push_back(traj.derivatives[i]);
      continue;
    }
    // Four nodes around the interval [i, i+1], shifted inward at the ends.
    std::size_t first = i == 0 ? 0 : i - 1;
    first = std::min(first, m - 4);
    Vector v = Vector::Zero(traj.derivatives[first].size());
    for (std::size_t j = first; j < first + 4; ++j) {
      double w = 1.0;
      for (std::size_t k = first; k < first + 4; ++k) {
        if (k != j) w *= (t - traj.times[k]) / (traj.times[j] - traj.times[k]);
      }
      v += w * traj.derivatives[j];
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace pcdyn
