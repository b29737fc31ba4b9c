#pragma once

#include "pcdyn/forces.hpp"
#include "pcdyn/params.hpp"
#include "pcdyn/state.hpp"

#include <vector>

namespace pcdyn {

// Charge-space maps acting on particle-indexed 3N vectors. Indices below are
// 1-based in the comments to match the usual layout z = (z_1, ..., z_N).

/// (P z)_a = (e_a / 6 pi) sum_b e_b z_b.
Vector apply_P(const std::vector<double>& e, const Vector& z);

/// A has first column e_a; column j >= 2 has e_j in row j-1 and -e_{j-1} in row j.
Vector apply_A(const std::vector<double>& e, const Vector& z);
/// (A^t z)_1 = sum_a e_a z_a,  (A^t z)_j = e_j z_{j-1} - e_{j-1} z_j.
Vector apply_At(const std::vector<double>& e, const Vector& z);
/// A^{-1} z by a dense solve; requires every e_a != 0.
Vector solve_A(const std::vector<double>& e, const Vector& z);
/// Dense 3N x 3N matrix of A.
Matrix transform_matrix(const std::vector<double>& e);

/// Lower-right (3N-3) x (3N-3) block of A^t diag(m) A: block-tridiagonal with
/// diagonal e_j^2 m_{j-1} + e_{j-1}^2 m_j and off-diagonal -e_{j-1} e_{j+1} m_j.
Matrix m0_matrix(const std::vector<double>& e, const std::vector<double>& m);
/// [(prod_{j=2}^{N-1} e_j^2)(sum_j e_j^2 prod_{i != j} m_i)]^3.
double m0_det_closed_form(const std::vector<double>& e, const std::vector<double>& m);

/// Smooth cutoffs used by the third-order system outside the trust region.
///
/// u_reg = chi1(|u|) u with chi1 = 1 on [0, 3 c_v] and 0 beyond 4 c_v;
/// |xi_reg| = g(|xi|) with g the identity on [c_lower/3, 3 c_upper], clamped to
/// [c_lower/4, 4 c_upper]. Both blends are quintic smoothsteps (C^2).
struct Regularization {
  double c_v = 1.0;
  double c_lower = 1.0;  // C_*
  double c_upper = 1.0;  // C^*
  bool enabled = true;

  /// Throws InvalidArgument unless 0 < C_*/4 < C_*/3 < 3 C^* < 4 C^* and c_v > 0.
  void validate() const;
  double chi1(double s) const;
  /// g(s) = chi2(s) s.
  double separation_map(double s) const;

  /// c_v = 2 max|u_a| (1 if all at rest), C_* = min separation / 2,
  /// C^* = 2 max separation (both 1 for a single particle).
  static Regularization from_initial(const PhaseState& s);
  static Regularization none();
};

struct RegularizedState {
  Vector u;
  PairGeometry geometry;
};

RegularizedState regularize(const PhaseState& s, const Regularization& reg);

/// h0 = (1 / 4 pi e^2) sum_{a<b} e_a e_b (e_a/m_a - e_b/m_b) xi_ab / |xi_ab|^3,
/// evaluated on the regularized geometry.
Vec3 h0(const Vector& r, const ParticleSystem& sys, const Regularization& reg = Regularization::none());

/// Predicted sum_b e_b u''_b:  S / 2 with S from radiation_source.
Vec3 dipole_sum_formula(const Vector& r, const Vector& u, const ParticleSystem& sys);

/// Blocks of the transformed acceleration equation
///   B w = c + eps^{3/2} (e^4 / 6 pi) (y', 0, ..., 0),  u' = A w,  w = (y, eta),
/// with B = A^t K A and c = A^t b built from the regularized state.
struct ConstraintMatrix {
  Matrix m0;    // B[2..N, 2..N] at eps = 0
  Matrix m2;    // its eps-derivative: B[2..N, 2..N] = m0 + eps m2
  Matrix b;     // full B at the given eps
  Vector c;     // A^t b
};

ConstraintMatrix constraint_matrix(const PhaseState& s, const ParticleSystem& sys, double eps,
                                   const Regularization& reg);

/// eta solving (M0 + eps M2) eta = R(r, u, y, eps) = c[2..N] - B[2..N, 1] y.
Vector solve_constraint(const DAEState& s, const ParticleSystem& sys, double eps, const Regularization& reg);

struct ThirdOrderEval {
  Vector accel;   // u' = A (y, eta)
  Vector eta;
  Vec3 phi1;      // first block of 6 pi e^{-4} (B w - c)
  Vec3 ydot;      // eps^{-3/2} phi1
  double constraint_residual = 0.0;  // |(B w - c)[2..N]|
};

ThirdOrderEval third_order_evaluate(const DAEState& s, const ParticleSystem& sys, double eps,
                                    const Regularization& reg);
/// Packed derivative [u, u', y'] of the DAE state [r, u, y].
Vector third_order_rhs(const DAEState& s, const ParticleSystem& sys, double eps, const Regularization& reg);

/// Jacobian of y -> phi1. With slaved = true eta follows y through the
/// constraint; otherwise eta is held fixed.
Mat3 phi1_jacobian(const PhaseState& s, const ParticleSystem& sys, double eps, const Regularization& reg,
                   bool slaved);

/// Growth rate 6 pi e^{-4} sum_a e_a^2 m_a / eps^{3/2} obtained with eta frozen.
double runaway_rate_frozen(const ParticleSystem& sys, double eps);
/// Growth rate 6 pi / (sum_a e_a^2 / m_a) / eps^{3/2} of the full constrained
/// linearization at leading order.
double runaway_rate_slaved(const ParticleSystem& sys, double eps);

struct ManifoldInit {
  Vec3 y = Vec3::Zero();
  int refine_steps = 0;
  bool fell_back = false;  // refinement diverged, y = h0
};

/// Approximation of the slow manifold y = h_eps(r, u). Zero steps returns h0.
/// Each step solves phi1(y) = eps^{3/2} D_t h_prev along the slow flow, an
/// O(eps) correction to h0 rather than the exact invariant manifold.
ManifoldInit manifold_init(const PhaseState& s, const ParticleSystem& sys, double eps, int refine_steps,
                           const Regularization& reg = Regularization::none());

}  // namespace pcdyn
