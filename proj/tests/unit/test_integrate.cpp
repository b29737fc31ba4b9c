#include "doctest.h"

#include "generators.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

#include "pcdyn/diagnostics.hpp"
#include "pcdyn/integrate.hpp"

#include <cmath>
#include <numbers>

using namespace pcdyn;

namespace {

const double kPi = std::numbers::pi;

StepperConfig tight(double sample = 0.0) {
  StepperConfig cfg;
  cfg.abs_tol = 1e-12;
  cfg.rel_tol = 1e-12;
  cfg.sample_interval = sample;
  return cfg;
}

double separation(const Trajectory& tr, std::size_t i) {
  const Vector x = tr.states[i];
  return (x.segment<3>(0) - x.segment<3>(3)).norm();
}

}  // namespace

TEST_CASE("configuration validation") {
  StepperConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.method = Method::Rk4;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = StepperConfig{};
  cfg.abs_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS((CollisionGuard{0.0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((CollisionGuard{2.0, 1.0}.validate()), Error);
  CHECK(parse_method(method_name(Method::Rk4)) == Method::Rk4);
  CHECK(parse_method("rk45") == Method::Rk45);
  CHECK_THROWS_AS(parse_method("euler"), Error);
  for (auto t : {Termination::Completed, Termination::Collision, Termination::Escape, Termination::SolverFailure,
                 Termination::RunawaySuspected}) {
    CHECK_FALSE(termination_name(t).empty());
  }
}

TEST_CASE("single particle moves on a straight line") {
  const auto sys = ParticleSystem::from_effective({1.0}, {1.3}, {1.1});
  const PhaseState s0{0.0, Vector::Constant(3, 0.5), (Vector(3) << 0.1, -0.2, 0.3).finished()};
  for (Model m : {Model::Coulomb, Model::Darwin, Model::RrReduced}) {
    StepperConfig cfg;
    cfg.method = Method::Rk4;
    cfg.step = 0.1;
    const auto tr = integrate_model(m, s0, sys, 0.1, 5.0, cfg, {});
    CHECK(tr.termination == Termination::Completed);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const auto p = tr.phase(i);
      CHECK((p.r - (s0.r + p.t * s0.u)).norm() <= 1e-14);
      CHECK((p.u - s0.u).norm() == 0.0);
    }
    CHECK(tr.times.back() == doctest::Approx(5.0));
  }
}

TEST_CASE("circular coulomb orbit keeps its radius") {
  // Opposite unit charges, masses (1, 2): mu = 2/3, circular speed from mu v^2 / d = k / d^2.
  const auto sys = scenario::dipole_pair();
  const double k = 1.0 / (4.0 * kPi);
  const double mu = 2.0 / 3.0;
  const double d = 1.0;
  const double v = std::sqrt(k / (mu * d));
  const auto s0 = scenario::dipole_orbit(v);
  const double period = 2.0 * kPi * d / v;
  StepperConfig cfg;
  cfg.abs_tol = 1e-10;
  cfg.rel_tol = 1e-10;
  const auto tr = integrate_model(Model::Coulomb, s0, sys, 0.0, 10.0 * period, cfg, {});
  REQUIRE(tr.termination == Termination::Completed);
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) worst = std::max(worst, std::abs(separation(tr, i) - d));
  CHECK(worst <= 1e-6);
}

TEST_CASE("bound coulomb orbit has the kepler period") {
  const auto sys = scenario::dipole_pair();
  const double vrel = 0.25;
  const auto s0 = scenario::dipole_orbit(vrel);
  const double expect = oracle::kepler_period(1.0 / (4.0 * kPi), 2.0 / 3.0, 1.0, vrel);
  // Start at apoapsis-side x axis with y-velocity; the relative y coordinate returns to 0 going up after one period.
  const auto tr = integrate_model(Model::Coulomb, s0, sys, 0.0, 1.5 * expect, tight(), {});
  REQUIRE(tr.termination == Termination::Completed);
  double crossing = -1.0;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    const double y0 = tr.states[i - 1][1] - tr.states[i - 1][4];
    const double y1 = tr.states[i][1] - tr.states[i][4];
    if (tr.times[i] > 0.5 * expect && y0 < 0.0 && y1 >= 0.0) {
      // Refine on the Hermite interpolant.
      double lo = tr.times[i - 1], hi = tr.times[i];
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Vector x = resample(tr, {mid})[0];
        if (x[1] - x[4] < 0.0) lo = mid; else hi = mid;
      }
      crossing = 0.5 * (lo + hi);
      break;
    }
  }
  CHECK(crossing == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("coulomb time reversal") {
  const auto sys = scenario::dipole_pair();
  const auto s0 = scenario::dipole_orbit();
  const auto fwd = integrate_model(Model::Coulomb, s0, sys, 0.0, 8.0, tight(), {});
  REQUIRE(fwd.termination == Termination::Completed);
  const auto end = fwd.phase(fwd.size() - 1);
  const auto back = integrate_model(Model::Coulomb, end, sys, 0.0, 0.0, tight(), {});
  REQUIRE(back.termination == Termination::Completed);
  const auto start = back.phase(back.size() - 1);
  CHECK(start.t == doctest::Approx(0.0));
  CHECK((start.r - s0.r).norm() <= 1e-7);
  CHECK((start.u - s0.u).norm() <= 1e-7);
}

TEST_CASE("collision and escape guards") {
  const auto attract = scenario::dipole_pair();
  PhaseState fall{0.0, Vector::Zero(6), Vector::Zero(6)};
  fall.r[0] = 1.0;
  const CollisionGuard guard{0.2, 10.0};
  const auto tr = integrate_model(Model::Coulomb, fall, attract, 0.0, 100.0, tight(), guard);
  CHECK(tr.termination == Termination::Collision);
  CHECK(separation(tr, tr.size() - 1) == doctest::Approx(0.2).epsilon(1e-6));
  CHECK_FALSE(tr.message.empty());

  const auto repel = ParticleSystem::from_effective({1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0});
  const auto esc = integrate_model(Model::Coulomb, fall, repel, 0.0, 1e4, tight(), CollisionGuard{0.1, 3.0});
  CHECK(esc.termination == Termination::Escape);
  CHECK(separation(esc, esc.size() - 1) == doctest::Approx(3.0).epsilon(1e-6));

  CHECK_THROWS_AS(integrate_model(Model::Coulomb, fall, attract, 0.0, 1.0, tight(), CollisionGuard{1.5, 10.0}), Error);
}

TEST_CASE("sampling grid") {
  const auto sys = scenario::dipole_pair();
  const auto tr = integrate_model(Model::Darwin, scenario::dipole_orbit(), sys, 0.05, 2.0, tight(0.1), {});
  REQUIRE(tr.size() == 21);
  for (std::size_t i = 0; i < tr.size(); ++i) CHECK(tr.times[i] == doctest::Approx(0.1 * i).epsilon(1e-12));
  for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
}

TEST_CASE("resampling") {
  const auto sys = scenario::dipole_pair();
  const auto tr = integrate_model(Model::Coulomb, scenario::dipole_orbit(), sys, 0.0, 3.0, tight(0.05), {});

  SUBCASE("stored times are reproduced") {
    const auto xs = resample(tr, tr.times);
    for (std::size_t i = 0; i < tr.size(); ++i) CHECK((xs[i] - tr.states[i]).norm() == 0.0);
    const auto fs = resample_derivatives(tr, tr.times);
    for (std::size_t i = 0; i < tr.size(); ++i) CHECK((fs[i] - tr.derivatives[i]).norm() <= 1e-15);
  }

  SUBCASE("out of range") {
    CHECK_THROWS_AS(resample(tr, {-0.1}), Error);
    CHECK_THROWS_AS(resample(tr, {3.5}), Error);
  }

  SUBCASE("linear motion is exact") {
    const auto one = ParticleSystem::from_effective({1.0}, {1.0}, {1.0});
    const PhaseState s0{0.0, Vector::Zero(3), Vector::Constant(3, 0.7)};
    const auto lin = integrate_model(Model::Coulomb, s0, one, 0.0, 1.0, tight(0.25), {});
    const auto xs = resample(lin, {0.1, 0.33, 0.9});
    CHECK((xs[1].head<3>() - 0.33 * s0.u).norm() <= 1e-15);
  }

  SUBCASE("interpolation error is fourth order") {
    // Hermite interpolant of coarse samples at their midpoints against a fine reference run.
    const auto ref = integrate_model(Model::Coulomb, scenario::dipole_orbit(), sys, 0.0, 3.0, tight(0.0125), {});
    std::vector<double> hs, errs;
    for (double dt : {0.2, 0.1, 0.05, 0.025}) {
      const auto coarse = integrate_model(Model::Coulomb, scenario::dipole_orbit(), sys, 0.0, 3.0, tight(dt), {});
      std::vector<double> mids;
      for (std::size_t i = 0; i + 1 < coarse.size(); ++i) mids.push_back(0.5 * (coarse.times[i] + coarse.times[i + 1]));
      const auto xs = resample(coarse, mids);
      const auto truth = resample(ref, mids);
      double worst = 0.0;
      for (std::size_t i = 0; i < mids.size(); ++i) worst = std::max(worst, (xs[i] - truth[i]).norm());
      hs.push_back(dt);
      errs.push_back(worst);
    }
    CHECK(fit_order(hs, errs).slope == doctest::Approx(4.0).epsilon(0.1));
  }
}

TEST_CASE("fixed-step rk4 converges at fourth order on a darwin run") {
  const auto sys = scenario::dipole_pair();
  const auto s0 = scenario::dipole_orbit();
  const double eps = 0.05;
  const auto ref = integrate_model(Model::Darwin, s0, sys, eps, 4.0, tight(), {});
  const Vector truth = ref.states.back();
  std::vector<double> hs, errs;
  for (double h : {0.4, 0.2, 0.1, 0.05}) {
    StepperConfig cfg;
    cfg.method = Method::Rk4;
    cfg.step = h;
    const auto tr = integrate_model(Model::Darwin, s0, sys, eps, 4.0, cfg, {});
    hs.push_back(h);
    errs.push_back((tr.states.back() - truth).norm());
  }
  CHECK(fit_order(hs, errs).slope == doctest::Approx(4.0).epsilon(0.3 / 4.0));
}

TEST_CASE("third-order system") {
  const auto reg_none = Regularization::none();

  SUBCASE("symmetric identical particles follow the darwin flow") {
    const auto sys = ParticleSystem::from_effective({1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0});
    PhaseState s0{0.0, Vector(6), Vector(6)};
    s0.r << 0.5, 0.0, 0.0, -0.5, 0.0, 0.0;
    s0.u << 0.0, 0.2, 0.0, 0.0, -0.2, 0.0;
    const double eps = 0.02;
    const auto y0 = manifold_init(s0, sys, eps, 1).y;
    CHECK(y0.norm() <= 1e-15);
    StepperConfig cfg = tight(0.05);
    const auto dae = integrate_dae({0.0, s0.r, s0.u, y0}, sys, eps, 1.0, cfg, {}, reg_none);
    const auto dar = integrate_model(Model::Darwin, s0, sys, eps, 1.0, cfg, {});
    REQUIRE(dae.termination == Termination::Completed);
    REQUIRE(dae.size() == dar.size());
    for (std::size_t i = 0; i < dae.size(); ++i) {
      CHECK((dae.states[i].head(12) - dar.states[i]).norm() <= 1e-9);
      CHECK(dae.fast(i).norm() <= 1e-12);
    }
  }

  SUBCASE("an off-manifold start runs away") {
    const auto sys = scenario::dipole_pair();
    const auto s0 = scenario::dipole_orbit();
    const double eps = 0.05;
    const Vec3 y0 = h0(s0.r, sys) + Vec3(1e-3, 0.0, 0.0);
    const auto tr = integrate_dae({0.0, s0.r, s0.u, y0}, sys, eps, 1.0, StepperConfig{}, scenario::dipole_guard(),
                                  scenario::dipole_regularization());
    const bool ran_away = tr.termination == Termination::RunawaySuspected;
    const double final_gap = (tr.fast(tr.size() - 1) - h0(tr.phase(tr.size() - 1).r, sys)).norm();
    CHECK((ran_away || final_gap > 1e3));
  }

  SUBCASE("on-manifold run starts at the requested state and dissipates") {
    const auto sys = scenario::dipole_pair();
    const auto s0 = scenario::dipole_orbit();
    const double eps = 0.01;
    StepperConfig cfg = tight(0.05);
    OnManifoldConfig mcfg;
    mcfg.shooting_iterations = 2;
    const auto tr = integrate_on_manifold(s0, sys, eps, 2.0, cfg, scenario::dipole_guard(),
                                          scenario::dipole_regularization(), mcfg);
    REQUIRE(tr.termination == Termination::Completed);
    CHECK(tr.times.front() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tr.times.back() == doctest::Approx(2.0));
    CHECK(tr.initial_defect <= 1e-5);
    const auto rep = energy_series(tr, sys, eps);
    CHECK(rep.back().h_rr < rep.front().h_rr);
    for (double r : tr.constraint_residuals) CHECK(r <= 1e-10);
  }

  SUBCASE("on-manifold drift from h0 is first order in eps") {
    const auto sys = scenario::dipole_pair();
    const auto s0 = scenario::dipole_orbit();
    std::vector<double> gaps;
    for (double eps : {1e-2, 1e-3}) {
      const auto tr = integrate_on_manifold(s0, sys, eps, 1.0, tight(0.05), scenario::dipole_guard(),
                                            scenario::dipole_regularization());
      REQUIRE(tr.termination == Termination::Completed);
      double worst = 0.0;
      for (std::size_t i = 0; i < tr.size(); ++i) {
        worst = std::max(worst, (tr.fast(i) - h0(tr.phase(i).r, sys)).norm());
      }
      CHECK(worst <= 0.5 * eps);
      gaps.push_back(worst);
    }
    CHECK(gaps[1] < 0.2 * gaps[0]);
  }
}
