// Serial vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "sigrec/kernels.hpp"
#include "sigrec/recognizer.hpp"
#include "sigrec/trajtree.hpp"

using namespace sigrec;

namespace {

std::vector<LabeledTrajectory> random_walks(std::size_t count, std::size_t length, std::size_t dim,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<LabeledTrajectory> out;
  for (std::size_t i = 0; i < count; ++i) {
    Trajectory t(dim);
    std::vector<double> p(dim, 0.0);
    for (std::size_t s = 0; s < length; ++s) {
      t.push_back(p);
      for (auto& x : p) x += step(rng);
    }
    out.push_back({std::move(t), GoalId(i % 7)});
  }
  return out;
}

template <auto Kernel>
void BM_PrefixSignatures(benchmark::State& state) {
  const auto trajs = random_walks(static_cast<std::size_t>(state.range(0)), 100, 3, 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(trajs, 2));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// Branch scoring after 50 observations of one stored trajectory.
template <auto Kernel>
void BM_ScoreBranches(benchmark::State& state) {
  const auto trajs = random_walks(static_cast<std::size_t>(state.range(0)), 100, 3, 2);
  const auto tree = build_tree(trajs, 2);
  const auto bs = branches(tree);
  EngineConfig cfg;
  cfg.mode = state.range(1) ? ScoringMode::dtw : ScoringMode::plain;
  ObservationLog log(3, 2);
  for (std::size_t t = 0; t < 50; ++t) {
    log.append_received(static_cast<long>(t), trajs[0].trajectory[t]);
    log.append_filled(trajs[0].trajectory[t]);
  }
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(log, bs, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(bs.size()));
}

template <auto Kernel>
void BM_DtwCostTable(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<Series> a, b;
  for (const auto& lt : random_walks(n, 40, 6, 3)) {
    Series s;
    for (std::size_t t = 0; t < lt.trajectory.size(); ++t)
      s.emplace_back(lt.trajectory[t].begin(), lt.trajectory[t].end());
    (a.size() <= b.size() ? a : b).push_back(std::move(s));
  }
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(a.size() * b.size()));
}

}  // namespace

BENCHMARK(BM_PrefixSignatures<kernels::prefix_signatures_serial>)->Arg(56)->Arg(224);
BENCHMARK(BM_PrefixSignatures<kernels::prefix_signatures_parallel>)->Arg(56)->Arg(224);
BENCHMARK(BM_ScoreBranches<kernels::score_branches_serial>)->Args({56, 0})->Args({56, 1});
BENCHMARK(BM_ScoreBranches<kernels::score_branches_parallel>)->Args({56, 0})->Args({56, 1});
BENCHMARK(BM_DtwCostTable<kernels::dtw_cost_table_serial>)->Arg(32);
BENCHMARK(BM_DtwCostTable<kernels::dtw_cost_table_parallel>)->Arg(32);

BENCHMARK_MAIN();
