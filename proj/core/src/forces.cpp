#include "pcdyn/forces.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace pcdyn {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

void check_sizes(const PhaseState& s, const ParticleSystem& sys) {
  if (s.r.size() != 3 * sys.n() || s.u.size() != 3 * sys.n()) {
    throw Error(ErrorCode::InvalidArgument, "state size does not match particle count");
  }
}

}  // namespace

PairGeometry PairGeometry::from_positions(const Vector& r) {
  PairGeometry g;
  g.n_ = particle_count(r);
  g.xi_.assign(static_cast<std::size_t>(g.n_) * g.n_, Vec3::Zero());
  g.dist_.assign(static_cast<std::size_t>(g.n_) * g.n_, 0.0);
  for (int a = 0; a < g.n_; ++a) {
    for (int b = 0; b < g.n_; ++b) {
      if (a == b) continue;
      const Vec3 xi = block3(r, a) - block3(r, b);
      const double d = xi.norm();
      if (!(d > 0.0)) {
        throw Error(ErrorCode::CoincidentParticles,
                    "particles " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
      }
      g.xi_[g.index(a, b)] = xi;
      g.dist_[g.index(a, b)] = d;
    }
  }
  return g;
}

double PairGeometry::min_separation() const {
  double m = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n_; ++a)
    for (int b = a + 1; b < n_; ++b) m = std::min(m, dist(a, b));
  return m;
}

double PairGeometry::max_separation() const {
  double m = 0.0;
  for (int a = 0; a < n_; ++a)
    for (int b = a + 1; b < n_; ++b) m = std::max(m, dist(a, b));
  return m;
}

std::string_view model_name(Model m) {
  switch (m) {
    case Model::Coulomb: return "coulomb";
    case Model::Darwin: return "darwin";
    case Model::RrReduced: return "rr_reduced";
    case Model::ThirdOrder: return "third_order";
  }
  return "unknown";
}

Model parse_model(std::string_view name) {
  if (name == "coulomb") return Model::Coulomb;
  if (name == "darwin") return Model::Darwin;
  if (name == "rr_reduced") return Model::RrReduced;
  if (name == "third_order") return Model::ThirdOrder;
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + std::string(name) + "'");
}

Vector coulomb_rhs(const PhaseState& s, const ParticleSystem& sys) {
  check_sizes(s, sys);
  const auto g = PairGeometry::from_positions(s.r);
  Vector acc = Vector::Zero(s.r.size());
  for (int a = 0; a < sys.n(); ++a) {
    Vec3 f = Vec3::Zero();
    for (int b = 0; b < sys.n(); ++b) {
      if (a == b) continue;
      const double d = g.dist(a, b);
      f += sys.charges[a] * sys.charges[b] / kFourPi * g.xi(a, b) / (d * d * d);
    }
    block3(acc, a) = f / sys.masses[a];
  }
  return acc;
}

Vector g_alpha(const PairGeometry& g, const Vector& u, const Vector& accel, const ParticleSystem& sys,
               double eps) {
  const int n = sys.n();
  Vector out = Vector::Zero(3 * n);
  for (int a = 0; a < n; ++a) {
    const Vec3 ua = block3(u, a);
    Vec3 f = Vec3::Zero();
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const Vec3& xi = g.xi(a, b);
      const double d = g.dist(a, b);
      const double d3 = d * d * d;
      const double d5 = d3 * d * d;
      const Vec3 ub = block3(u, b);
      const Vec3 ab = block3(accel, b);
      const double k = sys.charges[a] * sys.charges[b] / kFourPi;
      const double ubxi = ub.dot(xi);
      Vec3 term = xi / d3;
      term += -eps * ab / (2.0 * d);
      term += -eps * ab.dot(xi) * xi / (2.0 * d3);
      term += eps * ub.squaredNorm() * xi / (2.0 * d3);
      term += -3.0 * eps * ubxi * ubxi * xi / (2.0 * d5);
      term += -eps * ua.dot(ub) * xi / d3;
      term += eps * ua.dot(xi) * ub / d3;
      f += k * term;
    }
    block3(out, a) = f;
  }
  return out;
}

Vector g_alpha(const PhaseState& s, const Vector& accel, const ParticleSystem& sys, double eps) {
  check_sizes(s, sys);
  return g_alpha(PairGeometry::from_positions(s.r), s.u, accel, sys, eps);
}

Vec3 mass_matrix_apply(const Vec3& u, double eps, const ParticleSystem& sys, int a, const Vec3& z) {
  const double m = sys.masses[a];
  const double ms = sys.star_masses[a];
  return (m + 0.5 * eps * ms * u.squaredNorm()) * z + eps * ms * u.dot(z) * u;
}

AccelerationSolve assemble_acceleration_system(const PairGeometry& g, const Vector& u,
                                               const ParticleSystem& sys, double eps) {
  const int n = sys.n();
  AccelerationSolve sol;
  sol.matrix = Matrix::Zero(3 * n, 3 * n);
  for (int a = 0; a < n; ++a) {
    const Vec3 ua = block3(u, a);
    const double ms = sys.star_masses[a];
    sol.matrix.block<3, 3>(3 * a, 3 * a) =
        (sys.masses[a] + 0.5 * eps * ms * ua.squaredNorm()) * Mat3::Identity() + eps * ms * ua * ua.transpose();
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const Vec3& xi = g.xi(a, b);
      const double d = g.dist(a, b);
      const double k = sys.charges[a] * sys.charges[b] / kFourPi;
      // G_a depends on u'_b through -(eps/2) k [u'_b/|xi| + (u'_b.xi) xi/|xi|^3].
      sol.matrix.block<3, 3>(3 * a, 3 * b) =
          0.5 * eps * k * (Mat3::Identity() / d + xi * xi.transpose() / (d * d * d));
    }
  }
  sol.rhs = g_alpha(g, u, Vector::Zero(3 * n), sys, eps);
  return sol;
}

Vector solve_dense(const Matrix& a, const Vector& b, double max_condition) {
  Eigen::PartialPivLU<Matrix> lu(a);
  // An exactly zero pivot makes Eigen's estimate come back as 1, so check it first.
  const double rc = lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0 ? lu.rcond() : 0.0;
  if (!(rc * max_condition >= 1.0)) {
    const double cond = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    throw SingularSystemError("linear system refused: condition estimate " + std::to_string(cond), cond);
  }
  return lu.solve(b);
}

Vector darwin_rhs(const PhaseState& s, const ParticleSystem& sys, double eps) {
  check_sizes(s, sys);
  const auto g = PairGeometry::from_positions(s.r);
  const auto sol = assemble_acceleration_system(g, s.u, sys, eps);
  return solve_dense(sol.matrix, sol.rhs);
}

Vec3 radiation_source(const PairGeometry& g, const Vector& u, const ParticleSystem& sys) {
  Vec3 s = Vec3::Zero();
  for (int b = 0; b < sys.n(); ++b) {
    for (int c = 0; c < sys.n(); ++c) {
      if (b == c) continue;
      const double ratio_gap = sys.charges[b] / sys.masses[b] - sys.charges[c] / sys.masses[c];
      if (ratio_gap == 0.0) continue;
      const Vec3& xi = g.xi(b, c);
      const double d = g.dist(b, c);
      const double d3 = d * d * d;
      const Vec3 du = block3(u, b) - block3(u, c);
      const double k = sys.charges[b] * sys.charges[c] / kFourPi;
      s += k * ratio_gap * (du / d3 - 3.0 * xi.dot(du) * xi / (d3 * d * d));
    }
  }
  return s;
}

Vector rr_force(const PhaseState& s, const ParticleSystem& sys, double eps) {
  check_sizes(s, sys);
  const Vec3 src = radiation_source(PairGeometry::from_positions(s.r), s.u, sys);
  Vector f = Vector::Zero(s.r.size());
  const double pref = std::pow(eps, 1.5) / (12.0 * std::numbers::pi);
  for (int a = 0; a < sys.n(); ++a) block3(f, a) = pref * sys.charges[a] * src;
  return f;
}

Vector rr_reduced_rhs(const PhaseState& s, const ParticleSystem& sys, double eps) {
  check_sizes(s, sys);
  const auto g = PairGeometry::from_positions(s.r);
  auto sol = assemble_acceleration_system(g, s.u, sys, eps);
  sol.rhs += rr_force(s, sys, eps);
  return solve_dense(sol.matrix, sol.rhs);
}

Vector model_rhs(Model m, const PhaseState& s, const ParticleSystem& sys, double eps) {
  switch (m) {
    case Model::Coulomb: return coulomb_rhs(s, sys);
    case Model::Darwin: return darwin_rhs(s, sys, eps);
    case Model::RrReduced: return rr_reduced_rhs(s, sys, eps);
    case Model::ThirdOrder: break;
  }
  throw Error(ErrorCode::InvalidArgument, "third_order is not a second-order model");
}

}  // namespace pcdyn
