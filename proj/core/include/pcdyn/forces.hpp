#pragma once

#include "pcdyn/params.hpp"
#include "pcdyn/state.hpp"

#include <string_view>
#include <vector>

namespace pcdyn {

/// Ordered-pair separations xi_ab = r_a - r_b and their lengths.
///
/// The lengths are stored separately so the regularized geometry of the
/// third-order system can substitute clamped separations.
class PairGeometry {
 public:
  /// Throws CoincidentParticles if two positions coincide.
  static PairGeometry from_positions(const Vector& r);

  int n() const { return n_; }
  const Vec3& xi(int a, int b) const { return xi_[index(a, b)]; }
  double dist(int a, int b) const { return dist_[index(a, b)]; }
  double min_separation() const;
  double max_separation() const;

  /// Replaces xi_ab by map(|xi_ab|) xi_ab / |xi_ab| for every pair.
  template <class F>
  PairGeometry rescaled(F&& map) const {
    PairGeometry g = *this;
    for (std::size_t i = 0; i < g.xi_.size(); ++i) {
      if (g.dist_[i] == 0.0) continue;
      const double s = map(g.dist_[i]);
      g.xi_[i] *= s / g.dist_[i];
      g.dist_[i] = s;
    }
    return g;
  }

 private:
  std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * n_ + b; }
  int n_ = 0;
  std::vector<Vec3> xi_;
  std::vector<double> dist_;
};

enum class Model { Coulomb, Darwin, RrReduced, ThirdOrder };

std::string_view model_name(Model m);
/// Accepts "coulomb", "darwin", "rr_reduced", "third_order".
Model parse_model(std::string_view name);

/// u'_a = (1/m_a) sum_b (e_a e_b / 4 pi) xi_ab / |xi_ab|^3.
Vector coulomb_rhs(const PhaseState& s, const ParticleSystem& sys);

/// Darwin force G_a(r, u, u', eps) on the Coulomb scale, all terms, for a
/// given acceleration guess.
Vector g_alpha(const PhaseState& s, const Vector& accel, const ParticleSystem& sys, double eps);
Vector g_alpha(const PairGeometry& g, const Vector& u, const Vector& accel, const ParticleSystem& sys,
               double eps);

/// M_a(u, eps) z = (m_a + (eps/2) m*_a u^2) z + eps m*_a (u.z) u.
Vec3 mass_matrix_apply(const Vec3& u, double eps, const ParticleSystem& sys, int a, const Vec3& z);

/// Linear system K u' = b equivalent to M_a u'_a = G_a(u') for all a.
/// K holds M_a on the diagonal blocks and the u'_b coupling of G_a off it;
/// b = G(u' = 0).
struct AccelerationSolve {
  Matrix matrix;
  Vector rhs;
};

AccelerationSolve assemble_acceleration_system(const PairGeometry& g, const Vector& u,
                                               const ParticleSystem& sys, double eps);

/// Dense LU solve refusing systems whose estimated 1-norm condition number
/// exceeds max_condition (throws SingularSystemError).
Vector solve_dense(const Matrix& a, const Vector& b, double max_condition = 1e12);

Vector darwin_rhs(const PhaseState& s, const ParticleSystem& sys, double eps);

/// S = sum_{b != b'} (e_b e_b'/4 pi)(e_b/m_b - e_b'/m_b')
///       [ (u_b - u_b')/|xi|^3 - 3 (xi.(u_b - u_b')) xi/|xi|^5 ],  xi = xi_bb'.
Vec3 radiation_source(const PairGeometry& g, const Vector& u, const ParticleSystem& sys);

/// Explicit dissipative force eps^{3/2} (e_a / 12 pi) S of the reduced system.
Vector rr_force(const PhaseState& s, const ParticleSystem& sys, double eps);

/// Darwin solve with rr_force added to the right-hand side.
Vector rr_reduced_rhs(const PhaseState& s, const ParticleSystem& sys, double eps);

/// Accelerations of one of the three second-order models (ThirdOrder rejected).
Vector model_rhs(Model m, const PhaseState& s, const ParticleSystem& sys, double eps);

}  // namespace pcdyn
