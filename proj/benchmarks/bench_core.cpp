#include <benchmark/benchmark.h>

#include "btmc/fem.hpp"
#include "btmc/forward_model.hpp"
#include "btmc/mlmcmc.hpp"
#include "btmc/prior.hpp"
#include "btmc/rng.hpp"
#include "btmc/wavelet.hpp"

namespace {

btmc::PriorParams params_1d() {
  btmc::PriorParams params;
  params.smoothness = 1.6;
  params.shape = 5.0 / 3.0;
  params.density = 0.8;
  params.dim = 1;
  return params;
}

btmc::PriorParams params_2d() {
  btmc::PriorParams params;
  params.smoothness = 2.4;
  params.shape = 5.0 / 3.0;
  params.density = 0.5;
  params.dim = 2;
  return params;
}

void BM_DrawPrior1d(benchmark::State& state) {
  btmc::Rng rng = btmc::make_rng(1);
  const auto params = params_1d();
  for (auto _ : state) {
    benchmark::DoNotOptimize(btmc::draw_prior_sample(params, state.range(0), rng));
  }
}
BENCHMARK(BM_DrawPrior1d)->Arg(6)->Arg(9);

void BM_Synthesize1d(benchmark::State& state) {
  const btmc::WaveletFamily family = btmc::build_family(5, 12);
  btmc::Rng rng = btmc::make_rng(2);
  const int trunc = static_cast<int>(state.range(0));
  const auto sample = btmc::draw_prior_sample(params_1d(), trunc, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(btmc::synthesize_field(sample, trunc, family, trunc + 1));
  }
}
BENCHMARK(BM_Synthesize1d)->Arg(6)->Arg(9);

void BM_Synthesize2d(benchmark::State& state) {
  const btmc::WaveletFamily family = btmc::build_family(5, 12);
  btmc::Rng rng = btmc::make_rng(3);
  const int trunc = static_cast<int>(state.range(0));
  const auto sample = btmc::draw_prior_sample(params_2d(), trunc, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(btmc::synthesize_field(sample, trunc, family, trunc + 1));
  }
}
BENCHMARK(BM_Synthesize2d)->Arg(5)->Arg(7);

void BM_Solve1d(benchmark::State& state) {
  const btmc::UniformMesh mesh{1, static_cast<int>(state.range(0))};
  const auto coefficient = btmc::constant_coefficient(mesh, 1.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(btmc::solve(mesh, coefficient, 10.0));
  }
}
BENCHMARK(BM_Solve1d)->Arg(7)->Arg(9);

void BM_Solve2d(benchmark::State& state) {
  const btmc::UniformMesh mesh{2, static_cast<int>(state.range(0))};
  const auto coefficient = btmc::constant_coefficient(mesh, 1.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(btmc::solve(mesh, coefficient, 10.0));
  }
}
BENCHMARK(BM_Solve2d)->Arg(4)->Arg(6)->Arg(7);

void BM_ATerms(benchmark::State& state) {
  btmc::Rng rng = btmc::make_rng(4);
  std::uniform_real_distribution<double> pot(-5.0, 5.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(btmc::a_terms(pot(rng), pot(rng), pot(rng), pot(rng)));
  }
}
BENCHMARK(BM_ATerms);

}  // namespace

BENCHMARK_MAIN();
