#pragma once

#include "pcdyn/integrate.hpp"
#include "pcdyn/params.hpp"
#include "pcdyn/state.hpp"

#include <cstddef>
#include <vector>

namespace pcdyn {

// Energies are on the Coulomb scale. Relative to the microscopic energies
// they carry one overall factor: H_micro = eps H_coulomb for H_C, H_D and
// H_RR alike. Inside H_D the velocity corrections are weighted by eps and
// the radiation term of H_RR by eps^{3/2}; see the README for the table.

/// H_C = sum (1/2) m u^2 + (1/2) sum_{a != b} e_a e_b / (4 pi |xi_ab|).
double energy_coulomb(const PhaseState& s, const ParticleSystem& sys);

/// H_D = sum ((1/2) m u^2 + (3 eps/8) m* u^4) + (1/2) sum_{a != b} k/|xi|
///       + (eps/4) sum_{a != b} (k/|xi|) (u_a.u_b + (u_a.xi)(u_b.xi)/|xi|^2),  k = e_a e_b / 4 pi.
double energy_darwin(const PhaseState& s, const ParticleSystem& sys, double eps);

/// H_RR = H_D - (eps^{3/2} / 6 pi) (sum_a e_a u_a).(sum_b e_b u'_b).
double energy_rr(const PhaseState& s, const Vector& accel, const ParticleSystem& sys, double eps);

/// Total canonical momentum sum_a dL_D/du_a.
Vec3 canonical_momentum(const PhaseState& s, const ParticleSystem& sys, double eps);

/// (eps^{3/2} / 6 pi) |sum_a e_a u'_a|^2, so that dH_RR/dt = -rate along the third-order system.
double dissipation_rate(const Vector& accel, const ParticleSystem& sys, double eps);

struct EnergyReport {
  double t = 0.0;
  double h_coulomb = 0.0;
  double h_darwin = 0.0;
  double h_rr = 0.0;
  Vec3 momentum = Vec3::Zero();
  double dissipation_rate = 0.0;
};

EnergyReport energy_report(const PhaseState& s, const Vector& accel, const ParticleSystem& sys, double eps);
/// One report per trajectory sample, using the stored accelerations.
std::vector<EnergyReport> energy_series(const Trajectory& traj, const ParticleSystem& sys, double eps);

struct IdentityResidual {
  std::vector<double> times;
  std::vector<double> residual;  // dH_RR/dt (centered difference) + rate
  double max_abs = 0.0;
  double mean_dhdt = 0.0;        // time-averaged dH_RR/dt over the run
};

/// Residual of dH_RR/dt = -rate on samples i - stride, i, i + stride.
/// Requires a uniformly sampled third-order trajectory.
IdentityResidual dissipation_identity_residual(const Trajectory& traj, const ParticleSystem& sys, double eps,
                                               std::size_t stride = 1);

struct ComparisonNorms {
  double sup_dr = 0.0;
  double sup_du = 0.0;
  double sup_dudot = 0.0;
  double sup_dhd = 0.0;
  std::size_t points = 0;
};

/// Sup-norm gaps on `points` uniform times in [t_lo, t_hi] (clipped to the common span).
ComparisonNorms compare(const Trajectory& a, const Trajectory& b, double t_lo, double t_hi, std::size_t points,
                        const ParticleSystem& sys, double eps);

struct ConvergenceFit {
  std::vector<double> x;
  std::vector<double> y;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least-squares fit log y = intercept + slope log x; needs >= 3 positive pairs.
ConvergenceFit fit_order(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pcdyn
