#pragma once

#include "pcdyn/state.hpp"

#include <vector>

namespace pcdyn {

/// Smooth, radial, compactly supported, normalized charge profile
///
///   phi(s) = C exp(-a / (1 - (s/R)^2)),  s < R;   phi(s) = 0,  s >= R,
///
/// with sharpness a (a = 1 is the standard bump) and C fixed so that
/// 4 pi int_0^R s^2 phi(s) ds = 1.
struct FormFactor {
  double support_radius = 1.0;
  double sharpness = 1.0;
  double amplitude = 0.0;  // C above

  double profile(double s) const;
  /// 4 pi int_0^R s^2 phi(s) ds, evaluated by adaptive quadrature.
  double normalization() const;
};

FormFactor make_form_factor(double support_radius, double sharpness = 1.0);

/// Radial Fourier transform under the unitary convention
///
///   phi^(k) = (2 pi)^{-3/2} int d^3x e^{-i k.x} phi(x)
///           = (2 pi)^{-3/2} 4 pi int_0^R s^2 phi(s) sin(ks)/(ks) ds,
///
/// so phi^(0) = (2 pi)^{-3/2} for a normalized profile.
double fourier_radial(const FormFactor& ff, double k);

/// m_e = (1/2) int d^3k |phi^(k)|^2 / k^2  (c = 1).
///
/// With the unitary convention above the Fourier transform of 1/(4 pi |x|)
/// is (2 pi)^{-3/2} / k^2, and Parseval gives exactly
///   m_e = (1/2) int int phi(x) phi(y) / (4 pi |x - y|) d^3x d^3y,
/// i.e. the convention factor between the k-space and x-space forms is 1.
double electromagnetic_mass(const FormFactor& ff);

struct EffectiveMasses {
  double m = 0.0;
  double m_star = 0.0;
};

/// m = m_b + (4/3) e^2 m_e,  m* = m_b + (16/15) e^2 m_e.
EffectiveMasses effective_masses(double bare_mass, double charge, double em_mass);

/// Charges and masses of the N particles. c = 1 throughout.
struct ParticleSystem {
  std::vector<double> charges;
  std::vector<double> bare_masses;
  std::vector<double> masses;       // m_a
  std::vector<double> star_masses;  // m*_a
  double em_mass = 0.0;             // m_e

  int n() const { return static_cast<int>(charges.size()); }
  /// e^2 = sum_a e_a^2.
  double e_squared_total() const;

  /// Builds the system from bare masses and an electromagnetic mass.
  static ParticleSystem from_bare(std::vector<double> charges, std::vector<double> bare_masses,
                                  double em_mass);
  /// Builds the system from effective masses directly (bare masses left empty).
  static ParticleSystem from_effective(std::vector<double> charges, std::vector<double> masses,
                                       std::vector<double> star_masses);
};

/// Microscopic <-> Coulomb scale map:  r = eps q,  u = eps^{-1/2} v,  t_C = eps^{3/2} t.
struct ScaleMap {
  double epsilon = 1.0;

  explicit ScaleMap(double eps);
  PhaseState to_coulomb(const PhaseState& micro) const;
  PhaseState to_microscopic(const PhaseState& coulomb) const;
};

PhaseState to_coulomb_scale(const PhaseState& micro, double epsilon);
PhaseState to_microscopic_scale(const PhaseState& coulomb, double epsilon);

/// zeta_v(x) = [(1 - v^2) x^2 + (x.v)^2]^{-1/2}, the comoving potential profile
/// of a point charge moving with constant velocity v, |v| < 1.
double soliton_potential(const Vec3& v, const Vec3& x);
/// Analytic gradient of soliton_potential with respect to x.
Vec3 soliton_potential_gradient(const Vec3& v, const Vec3& x);

struct SolitonFields {
  Vec3 electric;
  Vec3 magnetic;
};

/// Point-charge comoving fields with phi_v = (e / 4 pi) zeta_v:
///   E = -grad phi_v + (v . grad phi_v) v,   B = -v x grad phi_v.
SolitonFields point_soliton_fields(double charge, const Vec3& v, const Vec3& x);

}  // namespace pcdyn
