#include "pcdyn/params.hpp"

#include "quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace pcdyn {

namespace {

constexpr double kPi = std::numbers::pi;

// exp(-a / (1 - t^2)) on the unit ball, zero outside.
double unit_bump(double t, double a) {
  if (t >= 1.0) return 0.0;
  const double d = 1.0 - t * t;
  return std::exp(-a / d);
}

// 4 pi int_0^1 t^2 exp(-a / (1 - t^2)) dt
double unit_bump_mass(double a) {
  const auto f = [a](double t) { return t * t * unit_bump(t, a); };
  return 4.0 * kPi * detail::integrate_adaptive(f, 0.0, 1.0, 1e-14);
}

double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

}  // namespace

double FormFactor::profile(double s) const {
  if (s < 0.0) s = -s;
  if (s >= support_radius) return 0.0;
  return amplitude * unit_bump(s / support_radius, sharpness);
}

double FormFactor::normalization() const {
  const auto f = [this](double s) { return s * s * profile(s); };
  return 4.0 * kPi * detail::integrate_adaptive(f, 0.0, support_radius, 1e-14);
}

FormFactor make_form_factor(double support_radius, double sharpness) {
  if (!(support_radius > 0.0) || !std::isfinite(support_radius)) {
    throw Error(ErrorCode::InvalidArgument,
                "form factor support radius must be positive, got " + std::to_string(support_radius));
  }
  if (!(sharpness > 0.0) || !std::isfinite(sharpness)) {
    throw Error(ErrorCode::InvalidArgument, "form factor sharpness must be positive");
  }
  FormFactor ff;
  ff.support_radius = support_radius;
  ff.sharpness = sharpness;
  // Dilation phi_R(s) = R^{-3} phi_1(s / R) keeps the normalization exact.
  const double r3 = support_radius * support_radius * support_radius;
  ff.amplitude = 1.0 / (r3 * unit_bump_mass(sharpness));
  return ff;
}

double fourier_radial(const FormFactor& ff, double k) {
  if (k < 0.0) k = -k;
  const double kr = k * ff.support_radius;
  const double a = ff.sharpness;
  // In t = s / R:  phi^(k) = (2 pi)^{-3/2} 4 pi C R^3 int_0^1 t^2 bump(t) sinc(kR t) dt.
  const auto f = [a, kr](double t) { return t * t * unit_bump(t, a) * sinc(kr * t); };
  // Split into half-periods of the oscillation so each panel is smooth.
  const int panels = std::max(1, static_cast<int>(std::ceil(kr / kPi)));
  double sum = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = static_cast<double>(i) / panels;
    const double hi = static_cast<double>(i + 1) / panels;
    sum += detail::integrate_adaptive(f, lo, hi, 1e-13);
  }
  const double r3 = ff.support_radius * ff.support_radius * ff.support_radius;
  return std::pow(2.0 * kPi, -1.5) * 4.0 * kPi * ff.amplitude * r3 * sum;
}

namespace {

using GaussRule = boost::math::quadrature::gauss<double, 20>;

// Appends the nodes and weights of the 20-point Gauss-Legendre rule on [lo, hi].
void push_panel(double lo, double hi, std::vector<double>& nodes, std::vector<double>& weights) {
  // Boost stores the non-negative half of the symmetric rule.
  const auto& x = GaussRule::abscissa();
  const auto& w = GaussRule::weights();
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (std::size_t i = 0; i < x.size(); ++i) {
    nodes.push_back(mid + half * x[i]);
    weights.push_back(half * w[i]);
    if (x[i] != 0.0) {
      nodes.push_back(mid - half * x[i]);
      weights.push_back(half * w[i]);
    }
  }
}

// R m_e, with the radial transform evaluated on `panels` composite panels
// over t = s/R in [0, 1] and the kappa = kR integral on unit panels.
double scaled_em_mass(const FormFactor& ff, int panels) {
  std::vector<double> nodes;
  std::vector<double> weights;
  for (int p = 0; p < panels; ++p) {
    push_panel(static_cast<double>(p) / panels, static_cast<double>(p + 1) / panels, nodes, weights);
  }
  std::vector<double> density(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    density[i] = weights[i] * nodes[i] * nodes[i] * unit_bump(nodes[i], ff.sharpness);
  }
  const double r3 = ff.support_radius * ff.support_radius * ff.support_radius;
  const double pref = std::pow(2.0 * kPi, -1.5) * 4.0 * kPi * ff.amplitude * r3;
  const auto transform = [&](double kappa) {
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) sum += density[i] * sinc(kappa * nodes[i]);
    return pref * sum;
  };
  std::vector<double> kx;
  std::vector<double> kw;
  push_panel(0.0, 1.0, kx, kw);
  double total = 0.0;
  int quiet = 0;
  for (int p = 0; p < 4000; ++p) {
    double part = 0.0;
    for (std::size_t i = 0; i < kx.size(); ++i) {
      const double v = transform(p + kx[i]);
      part += kw[i] * v * v;
    }
    total += part;
    if (part <= 1e-17 * total) {
      if (++quiet >= 4) return 2.0 * kPi * total;
    } else {
      quiet = 0;
    }
  }
  throw Error(ErrorCode::QuadratureFailure, "electromagnetic mass: spectrum tail did not decay");
}

}  // namespace

double electromagnetic_mass(const FormFactor& ff) {
  // m_e = (1/2) 4 pi int_0^inf |phi^(k)|^2 dk; the k^2 of the measure cancels
  // k^{-2}. With kappa = kR this is (2 pi / R) int |phi^_1(kappa)|^2 dkappa.
  // The radial grid is doubled until two successive values agree.
  double previous = scaled_em_mass(ff, 16);
  for (int panels = 32; panels <= 1024; panels *= 2) {
    const double current = scaled_em_mass(ff, panels);
    if (std::abs(current - previous) <= 1e-12 * std::abs(current)) return current / ff.support_radius;
    previous = current;
  }
  throw Error(ErrorCode::QuadratureFailure, "electromagnetic mass: radial transform did not converge");
}

EffectiveMasses effective_masses(double bare_mass, double charge, double em_mass) {
  if (bare_mass < 0.0 || em_mass < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "bare and electromagnetic masses must be non-negative");
  }
  const double e2 = charge * charge;
  EffectiveMasses out{bare_mass + (4.0 / 3.0) * e2 * em_mass,
                      bare_mass + (16.0 / 15.0) * e2 * em_mass};
  if (!(out.m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "effective mass must be positive");
  }
  return out;
}

double ParticleSystem::e_squared_total() const {
  double s = 0.0;
  for (double e : charges) s += e * e;
  return s;
}

ParticleSystem ParticleSystem::from_bare(std::vector<double> charges, std::vector<double> bare_masses,
                                         double em_mass) {
  if (charges.size() != bare_masses.size() || charges.empty()) {
    throw Error(ErrorCode::InvalidArgument, "charges and bare masses must be non-empty and equal length");
  }
  ParticleSystem sys;
  sys.em_mass = em_mass;
  for (std::size_t a = 0; a < charges.size(); ++a) {
    const auto em = effective_masses(bare_masses[a], charges[a], em_mass);
    sys.masses.push_back(em.m);
    sys.star_masses.push_back(em.m_star);
  }
  sys.charges = std::move(charges);
  sys.bare_masses = std::move(bare_masses);
  return sys;
}

ParticleSystem ParticleSystem::from_effective(std::vector<double> charges, std::vector<double> masses,
                                              std::vector<double> star_masses) {
  if (charges.empty() || charges.size() != masses.size() || charges.size() != star_masses.size()) {
    throw Error(ErrorCode::InvalidArgument, "charges and masses must be non-empty and equal length");
  }
  for (std::size_t a = 0; a < masses.size(); ++a) {
    if (!(masses[a] > 0.0) || !(star_masses[a] >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "particle " + std::to_string(a) + " has a non-positive mass");
    }
  }
  ParticleSystem sys;
  sys.charges = std::move(charges);
  sys.masses = std::move(masses);
  sys.star_masses = std::move(star_masses);
  return sys;
}

ScaleMap::ScaleMap(double eps) : epsilon(eps) {
  if (!(eps > 0.0 && eps <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "epsilon must lie in (0, 1]");
  }
}

PhaseState ScaleMap::to_coulomb(const PhaseState& micro) const {
  return {std::pow(epsilon, 1.5) * micro.t, epsilon * micro.r, micro.u / std::sqrt(epsilon)};
}

PhaseState ScaleMap::to_microscopic(const PhaseState& coulomb) const {
  return {coulomb.t / std::pow(epsilon, 1.5), coulomb.r / epsilon, std::sqrt(epsilon) * coulomb.u};
}

PhaseState to_coulomb_scale(const PhaseState& micro, double epsilon) {
  return ScaleMap(epsilon).to_coulomb(micro);
}

PhaseState to_microscopic_scale(const PhaseState& coulomb, double epsilon) {
  return ScaleMap(epsilon).to_microscopic(coulomb);
}

namespace {

void check_soliton_args(const Vec3& v, const Vec3& x) {
  if (!(v.squaredNorm() < 1.0)) throw Error(ErrorCode::InvalidArgument, "soliton velocity must satisfy |v| < 1");
  if (x.squaredNorm() == 0.0) throw Error(ErrorCode::InvalidArgument, "soliton potential is singular at x = 0");
}

}  // namespace

double soliton_potential(const Vec3& v, const Vec3& x) {
  check_soliton_args(v, x);
  const double xv = x.dot(v);
  return 1.0 / std::sqrt((1.0 - v.squaredNorm()) * x.squaredNorm() + xv * xv);
}

Vec3 soliton_potential_gradient(const Vec3& v, const Vec3& x) {
  const double z = soliton_potential(v, x);
  return -z * z * z * ((1.0 - v.squaredNorm()) * x + x.dot(v) * v);
}

SolitonFields point_soliton_fields(double charge, const Vec3& v, const Vec3& x) {
  const Vec3 grad_phi = charge / (4.0 * kPi) * soliton_potential_gradient(v, x);
  return {-grad_phi + v.dot(grad_phi) * v, -v.cross(grad_phi)};
}

}  // namespace pcdyn
