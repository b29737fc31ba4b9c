#include "pcdyn/forces.hpp"
#include "pcdyn/integrate.hpp"
#include "pcdyn/manifold.hpp"
#include "pcdyn/params.hpp"
#include "pcdyn/rng.hpp"

#include <benchmark/benchmark.h>

using namespace pcdyn;

namespace {

// Particles on a jittered line so no pair is close.
struct Setup {
  ParticleSystem sys;
  PhaseState s;
};

Setup make(int n) {
  CounterRng rng(static_cast<std::uint64_t>(n));
  std::vector<double> e(n), m(n), ms(n);
  PhaseState s{0.0, Vector(3 * n), Vector(3 * n)};
  for (int a = 0; a < n; ++a) {
    e[a] = (a % 2 ? -1.0 : 1.0) * rng.uniform(0.5, 2.0);
    m[a] = rng.uniform(0.5, 3.0);
    ms[a] = 0.9 * m[a];
    s.r.segment<3>(3 * a) = Vec3(a, rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    s.u.segment<3>(3 * a) = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
  }
  return {ParticleSystem::from_effective(e, m, ms), s};
}

void BM_Coulomb(benchmark::State& st) {
  const auto [sys, s] = make(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(coulomb_rhs(s, sys));
}
BENCHMARK(BM_Coulomb)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_Darwin(benchmark::State& st) {
  const auto [sys, s] = make(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(model_rhs(Model::Darwin, s, sys, 0.01));
}
BENCHMARK(BM_Darwin)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_RrReduced(benchmark::State& st) {
  const auto [sys, s] = make(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(model_rhs(Model::RrReduced, s, sys, 0.01));
}
BENCHMARK(BM_RrReduced)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_ConstraintSolve(benchmark::State& st) {
  const auto [sys, s] = make(static_cast<int>(st.range(0)));
  const auto reg = Regularization::from_initial(s);
  const DAEState d{0.0, s.r, s.u, h0(s.r, sys, reg)};
  for (auto _ : st) benchmark::DoNotOptimize(solve_constraint(d, sys, 0.01, reg));
}
BENCHMARK(BM_ConstraintSolve)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_ManifoldInit(benchmark::State& st) {
  const auto [sys, s] = make(static_cast<int>(st.range(0)));
  const auto reg = Regularization::from_initial(s);
  for (auto _ : st) benchmark::DoNotOptimize(manifold_init(s, sys, 0.01, 1, reg));
}
BENCHMARK(BM_ManifoldInit)->Arg(2)->Arg(8);

void BM_DeterminantClosedForm(benchmark::State& st) {
  const auto [sys, s] = make(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(m0_det_closed_form(sys.charges, sys.masses));
}
BENCHMARK(BM_DeterminantClosedForm)->Arg(6)->Arg(64);

void BM_ElectromagneticMass(benchmark::State& st) {
  const auto ff = make_form_factor(1.0, static_cast<double>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(electromagnetic_mass(ff));
}
BENCHMARK(BM_ElectromagneticMass)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_DarwinOrbit(benchmark::State& st) {
  const auto [sys, s] = make(2);
  StepperConfig cfg;
  cfg.abs_tol = cfg.rel_tol = 1e-10;
  for (auto _ : st) benchmark::DoNotOptimize(integrate_model(Model::Darwin, s, sys, 0.01, 5.0, cfg, {}));
}
BENCHMARK(BM_DarwinOrbit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
