#include "pcdyn/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

namespace pcdyn {

namespace {

constexpr double kPi = std::numbers::pi;

void check_charge_vector(const std::vector<double>& e, const Vector& z) {
  if (z.size() != 3 * static_cast<Eigen::Index>(e.size())) {
    throw Error(ErrorCode::InvalidArgument, "vector size does not match the number of charges");
  }
}

void require_nonzero_charges(const std::vector<double>& e) {
  for (std::size_t a = 0; a < e.size(); ++a) {
    if (e[a] == 0.0) {
      throw Error(ErrorCode::InvalidArgument,
                  "charge of particle " + std::to_string(a) + " is zero; the transform A is singular");
    }
  }
}

// Quintic smoothstep on [0, 1], clamped.
double smoothstep(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

}  // namespace

Vector apply_P(const std::vector<double>& e, const Vector& z) {
  check_charge_vector(e, z);
  Vec3 sum = Vec3::Zero();
  for (std::size_t b = 0; b < e.size(); ++b) sum += e[b] * block3(z, static_cast<int>(b));
  Vector out(z.size());
  for (std::size_t a = 0; a < e.size(); ++a) block3(out, static_cast<int>(a)) = e[a] / (6.0 * kPi) * sum;
  return out;
}

Vector apply_A(const std::vector<double>& e, const Vector& z) {
  check_charge_vector(e, z);
  const int n = static_cast<int>(e.size());
  Vector out(z.size());
  for (int a = 0; a < n; ++a) {
    // Row a (0-based) meets column 0, column a+1 (entry e_{a+1}) and column a (entry -e_{a-1}).
    Vec3 v = e[a] * block3(z, 0);
    if (a + 1 < n) v += e[a + 1] * block3(z, a + 1);
    if (a >= 1) v -= e[a - 1] * block3(z, a);
    block3(out, a) = v;
  }
  return out;
}

Vector apply_At(const std::vector<double>& e, const Vector& z) {
  check_charge_vector(e, z);
  const int n = static_cast<int>(e.size());
  Vector out(z.size());
  Vec3 first = Vec3::Zero();
  for (int a = 0; a < n; ++a) first += e[a] * block3(z, a);
  block3(out, 0) = first;
  for (int j = 1; j < n; ++j) block3(out, j) = e[j] * block3(z, j - 1) - e[j - 1] * block3(z, j);
  return out;
}

Matrix transform_matrix(const std::vector<double>& e) {
  const int n = static_cast<int>(e.size());
  Matrix a = Matrix::Zero(3 * n, 3 * n);
  for (int row = 0; row < n; ++row) {
    a.block<3, 3>(3 * row, 0) = e[row] * Mat3::Identity();
  }
  for (int j = 1; j < n; ++j) {
    a.block<3, 3>(3 * (j - 1), 3 * j) = e[j] * Mat3::Identity();
    a.block<3, 3>(3 * j, 3 * j) = -e[j - 1] * Mat3::Identity();
  }
  return a;
}

Vector solve_A(const std::vector<double>& e, const Vector& z) {
  check_charge_vector(e, z);
  require_nonzero_charges(e);
  return solve_dense(transform_matrix(e), z);
}

Matrix m0_matrix(const std::vector<double>& e, const std::vector<double>& m) {
  const int n = static_cast<int>(e.size());
  if (n < 2 || m.size() != e.size()) {
    throw Error(ErrorCode::InvalidArgument, "M0 needs N >= 2 charges and matching masses");
  }
  Matrix out = Matrix::Zero(3 * (n - 1), 3 * (n - 1));
  // 0-based: column j of A (j >= 1) is e_j at particle j-1 and -e_{j-1} at particle j.
  for (int j = 1; j < n; ++j) {
    const int bj = 3 * (j - 1);
    out.block<3, 3>(bj, bj) = (e[j] * e[j] * m[j - 1] + e[j - 1] * e[j - 1] * m[j]) * Mat3::Identity();
    if (j + 1 < n) {
      const Mat3 off = -e[j - 1] * e[j + 1] * m[j] * Mat3::Identity();
      out.block<3, 3>(bj, bj + 3) = off;
      out.block<3, 3>(bj + 3, bj) = off;
    }
  }
  return out;
}

double m0_det_closed_form(const std::vector<double>& e, const std::vector<double>& m) {
  const std::size_t n = e.size();
  if (n < 2 || m.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "M0 needs N >= 2 charges and matching masses");
  }
  double inner = 1.0;
  for (std::size_t j = 1; j + 1 < n; ++j) inner *= e[j] * e[j];
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double prod = e[j] * e[j];
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) prod *= m[i];
    sum += prod;
  }
  const double d = inner * sum;
  return d * d * d;
}

void Regularization::validate() const {
  const bool ordered = c_v > 0.0 && c_lower > 0.0 && c_lower / 3.0 < 3.0 * c_upper;
  if (!ordered || !std::isfinite(c_v) || !std::isfinite(c_lower) || !std::isfinite(c_upper)) {
    throw Error(ErrorCode::InvalidArgument,
                "regularization bands must satisfy 0 < C_*/4 < C_*/3 < 3C^* < 4C^* and C_v > 0 (got C_v=" +
                    std::to_string(c_v) + ", C_*=" + std::to_string(c_lower) + ", C^*=" + std::to_string(c_upper) +
                    ")");
  }
}

double Regularization::chi1(double s) const {
  if (!enabled) return 1.0;
  return 1.0 - smoothstep((s - 3.0 * c_v) / c_v);
}

double Regularization::separation_map(double s) const {
  if (!enabled) return s;
  const double lo = c_lower / 4.0;
  const double lo_id = c_lower / 3.0;
  const double hi_id = 3.0 * c_upper;
  const double hi = 4.0 * c_upper;
  if (s <= lo) return lo;
  if (s < lo_id) return lo + smoothstep((s - lo) / (lo_id - lo)) * (s - lo);
  if (s <= hi_id) return s;
  if (s < hi) return s + smoothstep((s - hi_id) / (hi - hi_id)) * (hi - s);
  return hi;
}

Regularization Regularization::from_initial(const PhaseState& s) {
  Regularization reg;
  double umax = 0.0;
  for (int a = 0; a < s.n(); ++a) umax = std::max(umax, block3(s.u, a).norm());
  reg.c_v = umax > 0.0 ? 2.0 * umax : 1.0;
  if (s.n() >= 2) {
    const auto g = PairGeometry::from_positions(s.r);
    reg.c_lower = 0.5 * g.min_separation();
    reg.c_upper = 2.0 * g.max_separation();
  }
  return reg;
}

Regularization Regularization::none() {
  Regularization reg;
  reg.enabled = false;
  return reg;
}

RegularizedState regularize(const PhaseState& s, const Regularization& reg) {
  if (reg.enabled) reg.validate();
  RegularizedState out{s.u, PairGeometry::from_positions(s.r)};
  if (!reg.enabled) return out;
  for (int a = 0; a < s.n(); ++a) block3(out.u, a) *= reg.chi1(block3(s.u, a).norm());
  out.geometry = out.geometry.rescaled([&reg](double d) { return reg.separation_map(d); });
  return out;
}

Vec3 h0(const Vector& r, const ParticleSystem& sys, const Regularization& reg) {
  const double e2 = sys.e_squared_total();
  if (!(e2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "h0 requires at least one nonzero charge");
  const PhaseState s{0.0, r, Vector::Zero(r.size())};
  const auto g = regularize(s, reg).geometry;
  Vec3 out = Vec3::Zero();
  for (int a = 0; a < sys.n(); ++a) {
    for (int b = a + 1; b < sys.n(); ++b) {
      const double gap = sys.charges[a] / sys.masses[a] - sys.charges[b] / sys.masses[b];
      const double d = g.dist(a, b);
      out += sys.charges[a] * sys.charges[b] * gap * g.xi(a, b) / (d * d * d);
    }
  }
  return out / (4.0 * kPi * e2);
}

Vec3 dipole_sum_formula(const Vector& r, const Vector& u, const ParticleSystem& sys) {
  return 0.5 * radiation_source(PairGeometry::from_positions(r), u, sys);
}

ConstraintMatrix constraint_matrix(const PhaseState& s, const ParticleSystem& sys, double eps,
                                   const Regularization& reg) {
  require_nonzero_charges(sys.charges);
  const auto rs = regularize(s, reg);
  const Matrix a = transform_matrix(sys.charges);
  const auto k0 = assemble_acceleration_system(rs.geometry, rs.u, sys, 0.0);
  const auto k1 = assemble_acceleration_system(rs.geometry, rs.u, sys, 1.0);
  const auto ke = assemble_acceleration_system(rs.geometry, rs.u, sys, eps);
  const int n3 = 3 * sys.n();
  ConstraintMatrix cm;
  cm.b = a.transpose() * ke.matrix * a;
  cm.c = apply_At(sys.charges, ke.rhs);
  const Matrix b0 = a.transpose() * k0.matrix * a;
  const Matrix b1 = a.transpose() * (k1.matrix - k0.matrix) * a;
  cm.m0 = b0.bottomRightCorner(n3 - 3, n3 - 3);
  cm.m2 = b1.bottomRightCorner(n3 - 3, n3 - 3);
  return cm;
}

namespace {

Vector slaved_eta(const ConstraintMatrix& cm, const Vec3& y) {
  const Eigen::Index m = cm.b.rows() - 3;
  if (m == 0) return Vector(0);
  const Vector rhs = cm.c.tail(m) - cm.b.bottomLeftCorner(m, 3) * y;
  return solve_dense(cm.b.bottomRightCorner(m, m), rhs);
}

}  // namespace

Vector solve_constraint(const DAEState& s, const ParticleSystem& sys, double eps, const Regularization& reg) {
  return slaved_eta(constraint_matrix(s.phase(), sys, eps, reg), s.y);
}

ThirdOrderEval third_order_evaluate(const DAEState& s, const ParticleSystem& sys, double eps,
                                    const Regularization& reg) {
  const auto cm = constraint_matrix(s.phase(), sys, eps, reg);
  ThirdOrderEval ev;
  ev.eta = slaved_eta(cm, s.y);
  Vector w(cm.b.rows());
  w << s.y, ev.eta;
  const Vector defect = cm.b * w - cm.c;
  const double e2 = sys.e_squared_total();
  ev.phi1 = 6.0 * kPi / (e2 * e2) * defect.head<3>();
  ev.ydot = ev.phi1 / std::pow(eps, 1.5);
  ev.constraint_residual = defect.tail(defect.size() - 3).norm();
  ev.accel = apply_A(sys.charges, w);
  return ev;
}

Vector third_order_rhs(const DAEState& s, const ParticleSystem& sys, double eps, const Regularization& reg) {
  const auto ev = third_order_evaluate(s, sys, eps, reg);
  Vector out(s.r.size() + s.u.size() + 3);
  out << s.u, ev.accel, ev.ydot;
  return out;
}

Mat3 phi1_jacobian(const PhaseState& s, const ParticleSystem& sys, double eps, const Regularization& reg,
                   bool slaved) {
  const auto cm = constraint_matrix(s, sys, eps, reg);
  const double e2 = sys.e_squared_total();
  Mat3 j = cm.b.topLeftCorner<3, 3>();
  const Eigen::Index m = cm.b.rows() - 3;
  if (slaved && m > 0) {
    Eigen::PartialPivLU<Matrix> lu(cm.b.bottomRightCorner(m, m));
    j -= cm.b.topRightCorner(3, m) * lu.solve(cm.b.bottomLeftCorner(m, 3));
  }
  return 6.0 * kPi / (e2 * e2) * j;
}

double runaway_rate_frozen(const ParticleSystem& sys, double eps) {
  const double e2 = sys.e_squared_total();
  double s = 0.0;
  for (int a = 0; a < sys.n(); ++a) s += sys.charges[a] * sys.charges[a] * sys.masses[a];
  return 6.0 * kPi * s / (e2 * e2) / std::pow(eps, 1.5);
}

double runaway_rate_slaved(const ParticleSystem& sys, double eps) {
  double s = 0.0;
  for (int a = 0; a < sys.n(); ++a) s += sys.charges[a] * sys.charges[a] / sys.masses[a];
  return 6.0 * kPi / s / std::pow(eps, 1.5);
}

namespace {

// y solving phi1(x, y) = target. phi1 is affine in y once eta is slaved.
Vec3 solve_phi1(const PhaseState& s, const ParticleSystem& sys, double eps, const Regularization& reg,
                const Vec3& target) {
  const auto cm = constraint_matrix(s, sys, eps, reg);
  const double e2 = sys.e_squared_total();
  const double scale = 6.0 * kPi / (e2 * e2);
  const Eigen::Index m = cm.b.rows() - 3;
  Mat3 j = cm.b.topLeftCorner<3, 3>();
  Vec3 offset = -cm.c.head<3>();
  if (m > 0) {
    Eigen::PartialPivLU<Matrix> lu(cm.b.bottomRightCorner(m, m));
    j -= cm.b.topRightCorner(3, m) * lu.solve(cm.b.bottomLeftCorner(m, 3));
    offset += cm.b.topRightCorner(3, m) * lu.solve(cm.c.tail(m));
  }
  const Vector rhs = target / scale - offset;
  return solve_dense(j, rhs);
}

}  // namespace

ManifoldInit manifold_init(const PhaseState& s, const ParticleSystem& sys, double eps, int refine_steps,
                           const Regularization& reg) {
  if (refine_steps < 0) throw Error(ErrorCode::InvalidArgument, "refine_steps must be non-negative");
  ManifoldInit out;
  const Vec3 base = h0(s.r, sys, reg);
  out.y = base;
  if (refine_steps == 0) return out;

  const double eps32 = std::pow(eps, 1.5);
  const double delta = 1e-4;

  // h_k(x); level 0 is h0, level k solves phi1 = eps^{3/2} D_t h_{k-1}.
  std::function<Vec3(const PhaseState&, int)> level = [&](const PhaseState& x, int k) -> Vec3 {
    if (k == 0) return h0(x.r, sys, reg);
    Vec3 dt_prev;
    if (k == 1) {
      // h0 depends on r only, so D_t h0 = e^{-2} d/dt sum e_b u'_b^Coulomb.
      const auto rs = regularize(x, reg);
      dt_prev = 0.5 * radiation_source(rs.geometry, rs.u, sys) / sys.e_squared_total();
    } else {
      const Vec3 y_prev = level(x, k - 1);
      const auto ev = third_order_evaluate(DAEState{x.t, x.r, x.u, y_prev}, sys, eps, reg);
      const PhaseState fwd{x.t, x.r + delta * x.u, x.u + delta * ev.accel};
      const PhaseState bwd{x.t, x.r - delta * x.u, x.u - delta * ev.accel};
      dt_prev = (level(fwd, k - 1) - level(bwd, k - 1)) / (2.0 * delta);
    }
    return solve_phi1(x, sys, eps, reg, eps32 * dt_prev);
  };

  try {
    const Vec3 y = level(s, refine_steps);
    if (!y.allFinite()) throw Error(ErrorCode::ConstraintFailure, "non-finite manifold refinement");
    out.y = y;
    out.refine_steps = refine_steps;
  } catch (const Error&) {
    out.y = base;
    out.fell_back = true;
  }
  return out;
}

}  // namespace pcdyn
