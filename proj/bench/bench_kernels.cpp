#include <benchmark/benchmark.h>

#include "mlsg/estimators.hpp"
#include "mlsg/optimizers.hpp"

namespace {

const mlsg::ProblemData& problem() {
  static const mlsg::ProblemData data = mlsg::ProblemData::test_case(1e-4, 0.125, 3);
  return data;
}

void mlmc(benchmark::State& state, bool parallel) {
  const auto& data = problem();
  const int levels = static_cast<int>(state.range(0));
  const mlsg::FeField u = mlsg::FeField::zero(data.meshes().mesh(0));
  std::vector<std::int64_t> samples(static_cast<std::size_t>(levels + 1));
  for (int l = 0; l <= levels; ++l) samples[static_cast<std::size_t>(l)] = std::int64_t{64} >> (2 * l);
  const auto source = mlsg::keyed_xi_source(1, 0, 1);
  for (auto _ : state) {
    auto out = parallel ? mlsg::mlmc_gradient(data, u, levels, samples, source, 2.0)
                        : mlsg::mlmc_gradient_serial(data, u, levels, samples, source, 2.0);
    benchmark::DoNotOptimize(out.grad.coeffs.data());
  }
}

void quadrature(benchmark::State& state, bool parallel) {
  const auto& data = problem();
  const int level = static_cast<int>(state.range(0));
  const auto grid = mlsg::gl_grid(3);
  const mlsg::FeField u = mlsg::FeField::zero(data.meshes().mesh(level));
  for (auto _ : state) {
    auto g = mlsg::quadrature_gradient(data, grid, level, u, parallel);
    benchmark::DoNotOptimize(g.coeffs.data());
  }
}

void BM_MlmcSerial(benchmark::State& s) { mlmc(s, false); }
void BM_MlmcParallel(benchmark::State& s) { mlmc(s, true); }
void BM_QuadratureSerial(benchmark::State& s) { quadrature(s, false); }
void BM_QuadratureParallel(benchmark::State& s) { quadrature(s, true); }

}  // namespace

BENCHMARK(BM_MlmcSerial)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MlmcParallel)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QuadratureSerial)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QuadratureParallel)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
