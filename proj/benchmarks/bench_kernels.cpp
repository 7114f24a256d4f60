#include <benchmark/benchmark.h>

#include "tlab/diagnostics.hpp"
#include "tlab/erm.hpp"
#include "tlab/linalg.hpp"
#include "tlab/model_space.hpp"
#include "tlab/rng.hpp"
#include "tlab/softmax.hpp"

namespace {

using namespace tlab;

void BM_SymSpectral(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = rng.normal_matrix(n, n);
  const Matrix s = gram(a);
  for (auto _ : state) benchmark::DoNotOptimize(sym_spectral(s));
}
BENCHMARK(BM_SymSpectral)->Arg(3)->Arg(20)->Arg(50);

void BM_HessianLogPartition(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Vector eta = rng.normal_vector(k - 1);
  for (auto _ : state) benchmark::DoNotOptimize(hessian_log_partition(eta));
}
BENCHMARK(BM_HessianLogPartition)->Arg(2)->Arg(30)->Arg(100);

void BM_SubspaceLossAndGrad(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 20, r = 3, k = 30;
  Rng rng(3);
  const Matrix x = rng.normal_matrix(n, d);
  Matrix y(n, k - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = rng.uniform_index(k);
    if (c + 1 < k) y(i, c) = 1.0;
  }
  const SubspaceRep rep = random_subspace(d, r, rng);
  const LinearHead head(project_columns(rng.normal_matrix(r, k - 1), 1.0), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(rep, head, x, y));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SubspaceLossAndGrad)->Arg(1000)->Arg(8000);

void BM_GaussianComplexityLinear(benchmark::State& state) {
  Rng rng(4);
  const Matrix z = rng.normal_matrix(500, 3);
  for (auto _ : state) {
    Rng draws(5);
    benchmark::DoNotOptimize(empirical_gaussian_complexity_linear(z, 1.0, 30, 100, draws));
  }
}
BENCHMARK(BM_GaussianComplexityLinear);

}  // namespace

BENCHMARK_MAIN();
