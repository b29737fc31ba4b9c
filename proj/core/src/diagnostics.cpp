#include "pcdyn/diagnostics.hpp"

#include "pcdyn/forces.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pcdyn {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 dipole(const Vector& v, const ParticleSystem& sys) {
  Vec3 d = Vec3::Zero();
  for (int a = 0; a < sys.n(); ++a) d += sys.charges[a] * block3(v, a);
  return d;
}

}  // namespace

double energy_coulomb(const PhaseState& s, const ParticleSystem& sys) {
  const auto g = PairGeometry::from_positions(s.r);
  double h = 0.0;
  for (int a = 0; a < sys.n(); ++a) {
    h += 0.5 * sys.masses[a] * block3(s.u, a).squaredNorm();
    for (int b = a + 1; b < sys.n(); ++b) h += sys.charges[a] * sys.charges[b] / (4.0 * kPi * g.dist(a, b));
  }
  return h;
}

double energy_darwin(const PhaseState& s, const ParticleSystem& sys, double eps) {
  const auto g = PairGeometry::from_positions(s.r);
  double h = 0.0;
  for (int a = 0; a < sys.n(); ++a) {
    const Vec3 ua = block3(s.u, a);
    const double u2 = ua.squaredNorm();
    h += 0.5 * sys.masses[a] * u2 + 0.375 * eps * sys.star_masses[a] * u2 * u2;
    for (int b = a + 1; b < sys.n(); ++b) {
      const Vec3 ub = block3(s.u, b);
      const Vec3& xi = g.xi(a, b);
      const double d = g.dist(a, b);
      const double k = sys.charges[a] * sys.charges[b] / (4.0 * kPi);
      // Each unordered pair appears twice in the ordered sums.
      h += k / d;
      h += 0.5 * eps * (k / d) * (ua.dot(ub) + ua.dot(xi) * ub.dot(xi) / (d * d));
    }
  }
  return h;
}

double energy_rr(const PhaseState& s, const Vector& accel, const ParticleSystem& sys, double eps) {
  return energy_darwin(s, sys, eps) - std::pow(eps, 1.5) / (6.0 * kPi) * dipole(s.u, sys).dot(dipole(accel, sys));
}

Vec3 canonical_momentum(const PhaseState& s, const ParticleSystem& sys, double eps) {
  const auto g = PairGeometry::from_positions(s.r);
  Vec3 p = Vec3::Zero();
  for (int a = 0; a < sys.n(); ++a) {
    const Vec3 ua = block3(s.u, a);
    p += sys.masses[a] * ua + 0.5 * eps * sys.star_masses[a] * ua.squaredNorm() * ua;
    for (int b = 0; b < sys.n(); ++b) {
      if (a == b) continue;
      const Vec3 ub = block3(s.u, b);
      const Vec3& xi = g.xi(a, b);
      const double d = g.dist(a, b);
      const double k = sys.charges[a] * sys.charges[b] / (4.0 * kPi);
      p += 0.5 * eps * k * (ub / d + ub.dot(xi) * xi / (d * d * d));
    }
  }
  return p;
}

double dissipation_rate(const Vector& accel, const ParticleSystem& sys, double eps) {
  return std::pow(eps, 1.5) / (6.0 * kPi) * dipole(accel, sys).squaredNorm();
}

EnergyReport energy_report(const PhaseState& s, const Vector& accel, const ParticleSystem& sys, double eps) {
  EnergyReport r;
  r.t = s.t;
  r.h_coulomb = energy_coulomb(s, sys);
  r.h_darwin = energy_darwin(s, sys, eps);
  r.h_rr = r.h_darwin - std::pow(eps, 1.5) / (6.0 * kPi) * dipole(s.u, sys).dot(dipole(accel, sys));
  r.momentum = canonical_momentum(s, sys, eps);
  r.dissipation_rate = dissipation_rate(accel, sys, eps);
  return r;
}

std::vector<EnergyReport> energy_series(const Trajectory& traj, const ParticleSystem& sys, double eps) {
  std::vector<EnergyReport> out;
  out.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) out.push_back(energy_report(traj.phase(i), traj.accel(i), sys, eps));
  return out;
}

IdentityResidual dissipation_identity_residual(const Trajectory& traj, const ParticleSystem& sys, double eps,
                                               std::size_t stride) {
  if (stride == 0) throw Error(ErrorCode::InvalidArgument, "stride must be positive");
  if (!traj.has_fast_variable()) throw Error(ErrorCode::InvalidArgument, "identity check needs a third-order trajectory");
  if (traj.size() < 2 * stride + 1) {
    throw Error(ErrorCode::InvalidArgument, "too few samples for a centered difference");
  }
  const double dt0 = traj.times[1] - traj.times[0];
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (std::abs(traj.times[i] - traj.times[i - 1] - dt0) > 1e-9 * std::abs(dt0)) {
      throw Error(ErrorCode::InvalidArgument, "identity check needs uniformly spaced samples");
    }
  }
  std::vector<double> h(traj.size());
  for (std::size_t i = 0; i < traj.size(); i += stride) h[i] = energy_rr(traj.phase(i), traj.accel(i), sys, eps);
  IdentityResidual out;
  for (std::size_t i = stride; i + stride < traj.size(); i += stride) {
    const double dt = traj.times[i + stride] - traj.times[i - stride];
    const double dhdt = (h[i + stride] - h[i - stride]) / dt;
    const double r = dhdt + dissipation_rate(traj.accel(i), sys, eps);
    out.times.push_back(traj.times[i]);
    out.residual.push_back(r);
    out.max_abs = std::max(out.max_abs, std::abs(r));
  }
  const std::size_t last = (traj.size() - 1) / stride * stride;
  out.mean_dhdt = (h[last] - h[0]) / (traj.times[last] - traj.times[0]);
  return out;
}

ComparisonNorms compare(const Trajectory& a, const Trajectory& b, double t_lo, double t_hi, std::size_t points,
                        const ParticleSystem& sys, double eps) {
  if (a.size() == 0 || b.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty trajectory");
  if (a.n != b.n) throw Error(ErrorCode::InvalidArgument, "trajectories have different particle counts");
  const double lo = std::max({t_lo, a.times.front(), b.times.front()});
  const double hi = std::min({t_hi, a.times.back(), b.times.back()});
  if (!(hi >= lo)) throw Error(ErrorCode::InvalidArgument, "trajectory spans do not overlap the window");
  if (points < 2) points = 2;
  std::vector<double> ts(points);
  for (std::size_t i = 0; i < points; ++i) {
    ts[i] = i + 1 == points ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  const auto sa = resample(a, ts);
  const auto sb = resample(b, ts);
  const auto da = resample_derivatives(a, ts);
  const auto db = resample_derivatives(b, ts);
  const int n3 = 3 * a.n;
  ComparisonNorms out;
  out.points = points;
  for (std::size_t i = 0; i < points; ++i) {
    for (int p = 0; p < a.n; ++p) {
      out.sup_dr = std::max(out.sup_dr, (sa[i].segment<3>(3 * p) - sb[i].segment<3>(3 * p)).norm());
      out.sup_du = std::max(out.sup_du, (sa[i].segment<3>(n3 + 3 * p) - sb[i].segment<3>(n3 + 3 * p)).norm());
      out.sup_dudot = std::max(out.sup_dudot, (da[i].segment<3>(n3 + 3 * p) - db[i].segment<3>(n3 + 3 * p)).norm());
    }
    const PhaseState pa{ts[i], sa[i].head(n3), sa[i].segment(n3, n3)};
    const PhaseState pb{ts[i], sb[i].head(n3), sb[i].segment(n3, n3)};
    out.sup_dhd = std::max(out.sup_dhd, std::abs(energy_darwin(pa, sys, eps) - energy_darwin(pb, sys, eps)));
  }
  return out;
}

ConvergenceFit fit_order(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw Error(ErrorCode::InvalidArgument, "fit_order needs at least 3 (x, y) pairs");
  }
  ConvergenceFit fit{x, y};
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "fit_order needs strictly positive values");
    }
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  const double dn = static_cast<double>(n);
  const double vxx = sxx - sx * sx / dn;
  const double vxy = sxy - sx * sy / dn;
  const double vyy = syy - sy * sy / dn;
  if (!(vxx > 0.0)) throw Error(ErrorCode::InvalidArgument, "fit_order needs at least two distinct x values");
  fit.slope = vxy / vxx;
  fit.intercept = (sy - fit.slope * sx) / dn;
  fit.r_squared = vyy > 0.0 ? vxy * vxy / (vxx * vyy) : 1.0;
  return fit;
}

}  // namespace pcdyn
