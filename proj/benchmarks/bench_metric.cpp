#include <benchmark/benchmark.h>

#include "manifold/generators.hpp"
#include "manifold/metric.hpp"
#include "manifold/optim.hpp"
#include "manifold/rng.hpp"

using namespace manifold;

namespace {

const DiffMap& bench_map(const std::string& name) { return builtin_generator(name); }

Vec bench_point(int n, std::uint64_t seed) {
  Rng rng(seed);
  return rng.normal_vector(n);
}

void BM_ForwardPass(benchmark::State& state) {
  const DiffMap& map = bench_map("blob16");
  const Vec z = bench_point(16, 1);
  for (auto _ : state) benchmark::DoNotOptimize(map.forward(z));
}
BENCHMARK(BM_ForwardPass);

void BM_HvpBackward(benchmark::State& state) {
  const DistanceMetric dist = DistanceMetric::pixel(bench_map("blob16"));
  const HvpOperator op(dist, bench_point(16, 1), HvpOperator::Mode::backward);
  const Vec v = bench_point(16, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(v));
}
BENCHMARK(BM_HvpBackward);

void BM_HvpForward(benchmark::State& state) {
  const DistanceMetric dist = DistanceMetric::pixel(bench_map("blob16"));
  const HvpOperator op(dist, bench_point(16, 1), HvpOperator::Mode::forward);
  const Vec v = bench_point(16, 2);
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(v));
}
BENCHMARK(BM_HvpForward);

void BM_HessianFull(benchmark::State& state) {
  const DistanceMetric dist = DistanceMetric::pixel(bench_map("blob16"));
  const Vec z = bench_point(16, 1);
  for (auto _ : state) benchmark::DoNotOptimize(hessian_full(dist, z));
}
BENCHMARK(BM_HessianFull);

void BM_LanczosTopK(benchmark::State& state) {
  const DistanceMetric dist = DistanceMetric::pixel(bench_map("blob16"));
  const HvpOperator op(dist, bench_point(16, 1),
                       state.range(0) ? HvpOperator::Mode::forward : HvpOperator::Mode::backward);
  for (auto _ : state)
    benchmark::DoNotOptimize(lanczos_topk(op, 10, 200, 1e-9, 7));
}
BENCHMARK(BM_LanczosTopK)->Arg(0)->Arg(1);  // 0 = backward, 1 = forward

void BM_DenseJacobianDeconv(benchmark::State& state) {
  const DiffMap& map = bench_map("deconv8");
  const Vec z = bench_point(8, 3);
  for (auto _ : state) benchmark::DoNotOptimize(dense_jacobian(map, z));
}
BENCHMARK(BM_DenseJacobianDeconv);

void BM_CmaesSphere(benchmark::State& state) {
  const ObjectiveFn sphere = [](const Vec& x) { return x.squaredNorm(); };
  const Vec x0 = bench_point(16, 4);
  for (auto _ : state) benchmark::DoNotOptimize(cmaes_minimize(sphere, x0, 0.5, 220, 5));
}
BENCHMARK(BM_CmaesSphere);

}  // namespace

BENCHMARK_MAIN();
