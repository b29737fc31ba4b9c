#include "doctest.h"

#include "generators.hpp"
#include "oracles.hpp"

#include "pcdyn/params.hpp"

#include <cmath>
#include <numbers>

using namespace pcdyn;

namespace {
const double kPi = std::numbers::pi;
const double kPhiHat0 = std::pow(2.0 * kPi, -1.5);
}  // namespace

TEST_CASE("form factor is normalized and compactly supported") {
  for (double R : {0.5, 1.0, 2.0, 4.0}) {
    for (double a : {1.0, 2.5}) {
      const auto ff = make_form_factor(R, a);
      CHECK(ff.normalization() == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(ff.profile(1.5 * R) == 0.0);
      CHECK(ff.profile(R) == 0.0);
      CHECK(ff.profile(0.5 * R) > 0.0);
    }
  }
}

TEST_CASE("form factor density scales as R^-3 under dilation") {
  const auto f1 = make_form_factor(1.0);
  const auto f2 = make_form_factor(2.0);
  CHECK(f2.profile(0.0) == doctest::Approx(f1.profile(0.0) / 8.0).epsilon(1e-13));
  CHECK(f2.profile(1.2) == doctest::Approx(f1.profile(0.6) / 8.0).epsilon(1e-13));
}

TEST_CASE("form factor rejects bad radius and sharpness") {
  CHECK_THROWS_AS(make_form_factor(0.0), Error);
  CHECK_THROWS_AS(make_form_factor(-1.0), Error);
  CHECK_THROWS_AS(make_form_factor(NAN), Error);
  CHECK_THROWS_AS(make_form_factor(1.0, 0.0), Error);
}

TEST_CASE("radial transform at k = 0 is fixed by the convention") {
  for (double R : {0.5, 1.0, 3.0}) {
    CHECK(fourier_radial(make_form_factor(R), 0.0) == doctest::Approx(kPhiHat0).epsilon(1e-10));
  }
}

TEST_CASE("radial transform decays at large k") {
  for (double R : {0.5, 1.0, 2.0}) {
    const auto ff = make_form_factor(R);
    CHECK(std::abs(fourier_radial(ff, 100.0 / R)) < 1e-3 * kPhiHat0);
  }
}

TEST_CASE("radial transform matches a direct 3D quadrature") {
  pcdyn::CounterRng rng(11);
  for (double a : {1.0, 2.5}) {
    const auto ff = make_form_factor(1.3, a);
    const oracle::Bump bump(1.3, a);
    for (double k : {0.0, 0.7, 2.5, 6.0, 11.0}) {
      const oracle::V3 dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      const double ref = oracle::fourier_3d(bump, k, dir);
      CAPTURE(k);
      CHECK(std::abs(fourier_radial(ff, k) - ref) <= 1e-8 * kPhiHat0);
    }
  }
}

TEST_CASE("electromagnetic mass scales as 1/R") {
  const double base = electromagnetic_mass(make_form_factor(1.0));
  CHECK(base > 0.0);
  CHECK(std::isfinite(base));
  CHECK(electromagnetic_mass(make_form_factor(2.0)) == doctest::Approx(base / 2.0).epsilon(1e-8));
  for (double R : {0.5, 2.0, 4.0}) {
    CHECK(electromagnetic_mass(make_form_factor(R)) * R == doctest::Approx(base).epsilon(1e-7));
  }
}

TEST_CASE("electromagnetic mass agrees with the position-space double integral") {
  for (double a : {1.0, 2.5}) {
    for (double R : {0.7, 1.0}) {
      const double k_space = electromagnetic_mass(make_form_factor(R, a));
      const double x_space = oracle::em_mass_position_space(oracle::Bump(R, a));
      CAPTURE(a);
      CAPTURE(R);
      CHECK(k_space == doctest::Approx(x_space).epsilon(1e-6));
    }
  }
}

TEST_CASE("effective masses") {
  auto em = effective_masses(0.0, 1.0, 1.0);
  CHECK(em.m == doctest::Approx(4.0 / 3.0));
  CHECK(em.m_star == doctest::Approx(16.0 / 15.0));
  em = effective_masses(1.0, 2.0, 0.3);
  CHECK(em.m == doctest::Approx(2.6));
  CHECK(em.m_star == doctest::Approx(2.28));
  em = effective_masses(1.0, 0.0, 5.0);
  CHECK(em.m == 1.0);
  CHECK(em.m_star == 1.0);
  CHECK_THROWS_AS(effective_masses(0.0, 0.0, 1.0), Error);
  CHECK_THROWS_AS(effective_masses(-1.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(effective_masses(1.0, 1.0, -1.0), Error);
}

TEST_CASE("particle system builders") {
  const auto sys = ParticleSystem::from_bare({1.0, -2.0}, {1.0, 0.5}, 0.3);
  CHECK(sys.n() == 2);
  CHECK(sys.masses[1] == doctest::Approx(0.5 + 4.0 / 3.0 * 4.0 * 0.3));
  CHECK(sys.e_squared_total() == doctest::Approx(5.0));
  CHECK_THROWS_AS(ParticleSystem::from_effective({1.0}, {1.0, 2.0}, {1.0, 2.0}), Error);
  CHECK_THROWS_AS(ParticleSystem::from_effective({1.0}, {0.0}, {0.0}), Error);
  CHECK_THROWS_AS(ParticleSystem::from_bare({}, {}, 0.1), Error);
}

TEST_CASE("scale map") {
  pcdyn::CounterRng rng(5);
  const PhaseState s{0.7, gen::vector(rng, 6, 2.0), gen::vector(rng, 6, 0.5)};

  const auto id = to_coulomb_scale(s, 1.0);
  CHECK(id.t == s.t);
  CHECK((id.r - s.r).norm() == 0.0);
  CHECK((id.u - s.u).norm() == 0.0);

  const double eps = 0.01;
  PhaseState micro{0.0, Vector::Zero(3), Vector::Zero(3)};
  micro.r[0] = 2.0 / eps;
  micro.u[0] = 0.1 * std::sqrt(eps);
  const auto c = to_coulomb_scale(micro, eps);
  CHECK(c.r[0] == doctest::Approx(2.0));
  CHECK(c.u[0] == doctest::Approx(0.1));

  for (double e : {1e-3, 0.05, 0.4}) {
    const auto back = to_microscopic_scale(to_coulomb_scale(s, e), e);
    CHECK(std::abs(back.t - s.t) <= 1e-14 * std::abs(s.t));
    CHECK((back.r - s.r).norm() <= 1e-14 * s.r.norm());
    CHECK((back.u - s.u).norm() <= 1e-14 * s.u.norm());
  }
  CHECK_THROWS_AS(ScaleMap(0.0), Error);
  CHECK_THROWS_AS(ScaleMap(1.5), Error);
}

TEST_CASE("soliton potential closed form") {
  const Vec3 x(0.3, -1.2, 0.4);
  CHECK(soliton_potential(Vec3::Zero(), x) == doctest::Approx(1.0 / x.norm()));
  CHECK(soliton_potential(Vec3(0.6, 0, 0), Vec3(0, 1, 0)) == doctest::Approx(1.25));

  const auto f = point_soliton_fields(2.0, Vec3::Zero(), x);
  const Vec3 coulomb = 2.0 / (4.0 * kPi) * x / std::pow(x.norm(), 3);
  CHECK((f.electric - coulomb).norm() <= 1e-15);
  CHECK(f.magnetic.norm() == 0.0);

  CHECK_THROWS_AS(soliton_potential(Vec3(1.0, 0, 0), x), Error);
  CHECK_THROWS_AS(soliton_potential(Vec3(0.1, 0, 0), Vec3::Zero()), Error);
}

TEST_CASE("soliton gradient matches finite differences; magnetic field is orthogonal") {
  pcdyn::CounterRng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    v *= rng.uniform(0.0, 0.95) / v.norm();
    const Vec3 x(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    if (x.norm() < 0.2) continue;
    const Vec3 grad = soliton_potential_gradient(v, x);
    const double h = 1e-5;
    Vec3 fd;
    for (int i = 0; i < 3; ++i) {
      Vec3 xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (soliton_potential(v, xp) - soliton_potential(v, xm)) / (2 * h);
    }
    CHECK((grad - fd).norm() <= 1e-6 * grad.norm());

    const auto f = point_soliton_fields(1.0, v, x);
    CHECK(std::abs(f.magnetic.dot(v)) <= 1e-14 * (1.0 + f.magnetic.norm()));
    CHECK(std::abs(f.magnetic.dot(grad)) <= 1e-13 * (1.0 + f.magnetic.norm() * grad.norm()));
  }
}
