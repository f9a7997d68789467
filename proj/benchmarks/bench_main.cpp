#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "qpnls/cauchy.hpp"
#include "qpnls/krylov.hpp"
#include "qpnls/linop.hpp"
#include "qpnls/nonlinearity.hpp"
#include "qpnls/qp_solver.hpp"
#include "qpnls/resonance.hpp"
#include "qpnls/surface.hpp"

using namespace qpnls;

namespace {

NlsProblem problem_for(const SeedSolution& s, int p, double delta) {
  NlsProblem pr;
  pr.b = s.b();
  pr.d = s.d;
  pr.p = p;
  pr.delta = delta;
  return pr;
}

std::vector<double> omega0_of(const SeedSolution& s) {
  std::vector<double> w;
  for (long x : s.omega0()) w.push_back(static_cast<double>(x));
  return w;
}

const SeedSolution& seed_2d() {
  static const SeedSolution s{2, {{1, 0}, {0, 1}}, {{0.3, 0.1}, {-0.2, 0.25}}};
  return s;
}

}  // namespace

// Nonlinear term on the alias-free grid; range(0) is the spatial box radius.
static void BM_Nonlinear(benchmark::State& state) {
  const auto& s = seed_2d();
  const TruncationBox box{static_cast<int>(state.range(0)), 3};
  const NonlinearEvaluator ev(problem_for(s, static_cast<int>(state.range(1)), 0.1), box);
  const auto f = s.field(box);
  const auto u = to_dense(f.u, ev.grid()), v = to_dense(f.v, ev.grid());
  for (auto _ : state) benchmark::DoNotOptimize(ev.nonlinear(u, v));
}
BENCHMARK(BM_Nonlinear)->Args({2, 1})->Args({4, 1})->Args({2, 2})->Unit(benchmark::kMicrosecond);

static void BM_Residual(benchmark::State& state) {
  const auto& s = seed_2d();
  const auto pr = problem_for(s, 1, 0.1);
  const auto f = s.field({static_cast<int>(state.range(0)), 3});
  const auto w = omega0_of(s);
  for (auto _ : state) benchmark::DoNotOptimize(residual(f, w, pr));
}
BENCHMARK(BM_Residual)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

static void BM_LinearizedApply(benchmark::State& state) {
  const auto& s = seed_2d();
  const TruncationBox box{static_cast<int>(state.range(0)), 3};
  const auto op = assemble(s.field(box), omega0_of(s), problem_for(s, 1, 0.1));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  CVec h(op.dim());
  for (auto& x : h) x = {g(rng), g(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(h));
}
BENCHMARK(BM_LinearizedApply)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

// One diagonally preconditioned linear solve off the resonant set.
static void BM_GmresSolve(benchmark::State& state) {
  const auto& s = seed_2d();
  const TruncationBox box{static_cast<int>(state.range(0)), 3};
  auto w = omega0_of(s);
  for (double& x : w) x += 0.37;
  const auto op = assemble(s.field(box), w, problem_for(s, 1, 0.1));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  CVec rhs(op.dim());
  for (auto& x : rhs) x = {g(rng), g(rng)};
  CVec inv(op.dim());
  for (std::size_t r = 0; r < op.dim(); ++r) inv[r] = 1.0 / op.diagonal(r);
  const LinearMap apply = [&](const CVec& x) { return op.apply(x); };
  const LinearMap precond = [&](const CVec& x) { return CVec(inv.cwiseProduct(x)); };
  GmresOptions opt;
  opt.rel_tol = 1e-12;
  for (auto _ : state) {
    const auto r = gmres(apply, precond, rhs, opt);
    state.counters["iterations"] = r.iterations;
    benchmark::DoNotOptimize(r.x);
  }
}
BENCHMARK(BM_GmresSolve)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

// Full Newton solve of a two-mode branch.
static void BM_SolveBranch(benchmark::State& state) {
  const SeedSolution s{1, {{1}, {2}}, {{1.0, 0.0}, {0.7, 0.4}}};
  const int p = static_cast<int>(state.range(0));
  const double delta = 1e-2;
  SeedSolution scaled = s;
  for (auto& a : scaled.amps) a *= delta;
  SolveOptions opt;
  opt.enforce_excision = false;
  for (auto _ : state) benchmark::DoNotOptimize(solve_branch(scaled, problem_for(s, p, 1.0), opt));
}
BENCHMARK(BM_SolveBranch)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_SchurSpectrum(benchmark::State& state) {
  const SeedSolution s{1, {{1}}, {{0.2, 0.05}}};
  const TruncationBox box{static_cast<int>(state.range(0)), 3};
  const auto op = assemble(s.field(box), omega0_of(s), problem_for(s, 1, 1.0));
  const auto graph = build_resonance_graph(s, bicharacteristics(s, box), 1);
  for (auto _ : state) benchmark::DoNotOptimize(schur_spectrum(op, graph, 0.5));
}
BENCHMARK(BM_SchurSpectrum)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_SplitStep(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  auto u = CauchyState::zero(d, n, 1, 0.1);
  std::vector<int> j(d, 0);
  j[0] = 1;
  u.set(j, {0.4, 0.1});
  j[0] = -2;
  u.set(j, {0.2, 0.0});
  const SplitStep integrator(d, n, 1, 0.1);
  for (auto _ : state) integrator.advance(u, 0.01, 10);
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_SplitStep)->Args({1, 16})->Args({2, 10})->Args({2, 16})->Unit(benchmark::kMicrosecond);

static void BM_SurfaceGroundState(benchmark::State& state) {
  const auto metric = RevolutionMetric::torus(2.0);
  const auto op = separated_operator(metric, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ground_state(op, metric));
}
BENCHMARK(BM_SurfaceGroundState)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
