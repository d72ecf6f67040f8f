// Microbenchmarks for the hot paths: the E-step, the closed-form M-step, the
// Fisher information, the Bregman certificates, and the quadrature oracle.
// Sizes follow the experiment defaults (a few hundred rows, two or three
// components) so the numbers map directly onto observed run times.

#include <benchmark/benchmark.h>

#include <memory>

#include "mirror_em/baseline.hpp"
#include "mirror_em/expfam.hpp"
#include "mirror_em/models.hpp"
#include "mirror_em/solver.hpp"
#include "mirror_em/synthetic.hpp"
#include "mirror_em/verify.hpp"

namespace {

using namespace mirror_em;

struct Instance {
  std::shared_ptr<const ExpFamilyMixtureModel> model;
  NaturalParams point;

  Instance(Eigen::Index n, Eigen::Index k)
      : model(make_gaussian_mixture(
            generate_synthetic({"gmm", k, 1, n, 3.0, 17}).data, k)),
        point(make_point(*model)) {}

  static NaturalParams make_point(const ExpFamilyMixtureModel& m) {
    Rng rng(19);
    return initialize(m, InitMethod::kRandomRows, rng);
  }
};

void bm_expected_stats(benchmark::State& state) {
  const Instance inst(state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(expected_stats(*inst.model, inst.point).values());
  }
}
BENCHMARK(bm_expected_stats)->Args({200, 2})->Args({1000, 2})->Args({1000, 3});

void bm_mirror_step(benchmark::State& state) {
  const Instance inst(state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mirror_step(*inst.model, inst.point).values());
  }
}
BENCHMARK(bm_mirror_step)->Args({200, 2})->Args({1000, 2});

void bm_em_iteration(benchmark::State& state) {
  const Instance inst(state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_em(*inst.model, inst.point, 1).final_params);
  }
}
BENCHMARK(bm_em_iteration)->Args({200, 2})->Args({1000, 2});

void bm_fisher_information(benchmark::State& state) {
  const Instance inst(200, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fisher_information(inst.point).eval());
  }
}
BENCHMARK(bm_fisher_information)->Arg(2)->Arg(3);

void bm_bregman_stationarity(benchmark::State& state) {
  const Instance inst(state.range(0), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bregman_stationarity(*inst.model, inst.point));
  }
}
BENCHMARK(bm_bregman_stationarity)->Arg(200)->Arg(1000);

void bm_natural_decrement(benchmark::State& state) {
  const Instance inst(state.range(0), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(natural_decrement(*inst.model, inst.point));
  }
}
BENCHMARK(bm_natural_decrement)->Arg(200)->Arg(1000);

void bm_bregman_divergence(benchmark::State& state) {
  const Instance inst(200, 2);
  const NaturalParams other = mirror_step(*inst.model, inst.point);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bregman_divergence(inst.point, other));
  }
}
BENCHMARK(bm_bregman_divergence);

void bm_missing_information(benchmark::State& state) {
  const Instance inst(200, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(missing_information(*inst.model, inst.point).lambda_max);
  }
}
BENCHMARK(bm_missing_information);

void bm_quadrature_kl(benchmark::State& state) {
  const auto family = make_gaussian();
  Vec a(2), b(2);
  a << 0.0, -0.5;
  b << 1.0, -0.4;
  const NaturalParams from(family, a), to(family, b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(numeric_kl(from, to));
  }
}
BENCHMARK(bm_quadrature_kl);

void bm_empirical_smoothness(benchmark::State& state) {
  const Instance inst(200, 2);
  const EmTrace trace = run_em(*inst.model, inst.point, 30);
  const SmoothnessRegion region =
      region_between(inst.point.values(), trace.final_params);
  for (auto _ : state) {
    Rng rng(23);
    benchmark::DoNotOptimize(
        empirical_smoothness(*inst.model, region, state.range(0), rng));
  }
}
BENCHMARK(bm_empirical_smoothness)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
