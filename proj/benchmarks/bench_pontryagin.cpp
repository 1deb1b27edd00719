#include "pontryagin/finite_horizon.hpp"
#include "pontryagin/hypotheses.hpp"
#include "pontryagin/instances.hpp"
#include "pontryagin/limit_analysis.hpp"
#include "pontryagin/verifier.hpp"

#include <benchmark/benchmark.h>

#include <string>

using namespace pontryagin;

namespace {

const InstanceBundle& bundle(int which) {
  static const InstanceBundle lq = builtin("lq-stable");
  static const InstanceBundle boxed = builtin("lq-boundary-control");
  static const InstanceBundle growth = builtin("ramsey-growth");
  return which == 0 ? lq : which == 1 ? boxed : growth;
}

void BM_ComputeMultipliers(benchmark::State& state) {
  const InstanceBundle& b = bundle(static_cast<int>(state.range(0)));
  const Index h = state.range(1);
  const TruncatedProblem problem = truncate(b.system, b.reference, h);
  const ConstraintLinearization lin = assemble_constraints(problem);
  for (auto _ : state) benchmark::DoNotOptimize(compute_multipliers(problem, lin));
}
BENCHMARK(BM_ComputeMultipliers)
    ->ArgsProduct({{0, 1, 2}, {5, 10, 20, 40}})
    ->Unit(benchmark::kMicrosecond);

void BM_Sweep(benchmark::State& state) {
  const InstanceBundle& b = bundle(static_cast<int>(state.range(0)));
  SweepOptions opts;
  opts.h_max = state.range(1);
  opts.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sweep(b.system, b.reference, opts));
}
BENCHMARK(BM_Sweep)->ArgsProduct({{0, 1}, {10, 20}})->Unit(benchmark::kMillisecond);

void BM_CheckHypotheses(benchmark::State& state) {
  const InstanceBundle& b = bundle(static_cast<int>(state.range(0)));
  HypothesisOptions opts;
  opts.cap = state.range(1);
  for (auto _ : state) benchmark::DoNotOptimize(check_hypotheses(b.system, b.reference, opts));
}
BENCHMARK(BM_CheckHypotheses)->ArgsProduct({{0, 1, 2}, {10, 40}})->Unit(benchmark::kMicrosecond);

void BM_Verify(benchmark::State& state) {
  const InstanceBundle& b = bundle(0);
  const Index h = state.range(0);
  const std::vector<Vector> p = riccati_oracle(b, h);
  for (auto _ : state) benchmark::DoNotOptimize(verify(b.system, b.reference, 1.0, p, h));
}
BENCHMARK(BM_Verify)->Arg(10)->Arg(40)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
