#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "knobsync/kernelcdf.hpp"
#include "knobsync/knobsync.hpp"

namespace {

// Deterministic data without pulling in the test support headers.
struct Rng {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }
  double normal() {
    return std::sqrt(-2.0 * std::log(uniform())) *
           std::cos(2.0 * 3.14159265358979323846 * uniform());
  }
};

knobsync::DataMatrix blob_grid(std::size_t per_cluster, std::size_t side,
                               double sd, std::uint64_t seed) {
  Rng rng{seed};
  knobsync::DataMatrix m;
  m.p = 2;
  for (std::size_t cy = 0; cy < side; ++cy)
    for (std::size_t cx = 0; cx < side; ++cx)
      for (std::size_t i = 0; i < per_cluster; ++i) {
        m.values.push_back(5.0 * static_cast<double>(cx) + sd * rng.normal());
        m.values.push_back(5.0 * static_cast<double>(cy) + sd * rng.normal());
      }
  m.n = m.values.size() / 2;
  m.mask.assign(m.values.size(), 1);
  return m;
}

void BM_CdfEval(benchmark::State& state) {
  Rng rng{7};
  std::vector<double> samples(static_cast<std::size_t>(state.range(0)));
  for (auto& s : samples) s = -std::log(rng.uniform()) - std::log(rng.uniform());
  auto cdf = knobsync::make_residual_cdf(samples);
  double y = 0.0;
  for (auto _ : state) {
    y += 0.001;
    if (y > 8.0) y = 0.001;
    benchmark::DoNotOptimize(knobsync::cdf_eval(cdf, y));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CdfEval)->Arg(100)->Arg(1000)->Arg(10000);

void BM_Kmeans(benchmark::State& state) {
  auto m = blob_grid(static_cast<std::size_t>(state.range(0)), 3, 0.6, 11);
  for (auto _ : state) {
    auto part = knobsync::run_kmeans(m, 9, 4, 42);
    benchmark::DoNotOptimize(part.wss);
  }
  state.SetItemsProcessed(state.iterations() * m.n);
}
BENCHMARK(BM_Kmeans)->Arg(20)->Arg(100);

void BM_OverlapMatrix(benchmark::State& state) {
  auto m = blob_grid(40, static_cast<std::size_t>(state.range(0)), 1.2, 23);
  std::size_t K = static_cast<std::size_t>(state.range(0)) *
                  static_cast<std::size_t>(state.range(0));
  auto part = knobsync::run_kmeans(m, K, 4, 5);
  auto cdf = knobsync::make_residual_cdf(knobsync::normed_residuals(m, part));
  auto ctx = knobsync::make_overlap_context(cdf, m, part);
  auto forest = knobsync::singleton_forest(K);
  for (auto _ : state) {
    auto om = knobsync::overlap_matrix_ctx(ctx, forest);
    benchmark::DoNotOptimize(om.a.data());
  }
}
BENCHMARK(BM_OverlapMatrix)->Arg(2)->Arg(4);

void BM_MergeSweep(benchmark::State& state) {
  auto m = blob_grid(40, 3, 1.6, 31);
  auto part = knobsync::run_kmeans(m, 12, 4, 5);
  auto cdf = knobsync::make_residual_cdf(knobsync::normed_residuals(m, part));
  auto ctx = knobsync::make_overlap_context(cdf, m, part);
  auto initial = knobsync::overlap_matrix_ctx(ctx, knobsync::singleton_forest(12));
  for (auto _ : state) {
    auto out = knobsync::run_merging(ctx, 1.0, knobsync::TriggerVariant::printed,
                                     &initial);
    benchmark::DoNotOptimize(out.forest.groups.data());
  }
}
BENCHMARK(BM_MergeSweep);

void BM_FullPipeline(benchmark::State& state) {
  auto m = blob_grid(60, 2, 0.8, 47);
  knobsync::KnobSyncConfig config;
  config.phase.k_max = 10;
  config.phase.start_cap = 8;
  for (auto _ : state) {
    auto out = knobsync::run_knobsync(m, config, 3);
    benchmark::DoNotOptimize(out.n_clusters);
  }
}
BENCHMARK(BM_FullPipeline);

}  // namespace

BENCHMARK_MAIN();
