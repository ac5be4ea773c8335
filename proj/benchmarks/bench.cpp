#include <cmath>
#include <memory>

#include <benchmark/benchmark.h>

#include "smoothfix/branching_tree.hpp"
#include "smoothfix/exponent.hpp"
#include "smoothfix/martingales.hpp"
#include "smoothfix/solutions.hpp"

using namespace smoothfix;

namespace {

WeightModel uniform_pair() {
  return WeightModel(IidCount{FixedCount{2}, UniformWeight{0.0, 1.0}}, 1.0, "iid_product",
                     "uniform-pair");
}

WeightModel mixture() {
  return WeightModel(FiniteMixture{{{0.5, {0.2, 1.2}}, {0.5, {0.25}}}}, 1.0, "finite_atoms");
}

void BM_SubtreeMass(benchmark::State& state) {
  const WeightModel model = uniform_pair();
  const auto depth = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const RandomTree tree(model, ++seed);
    benchmark::DoNotOptimize(subtree_mass(tree, tree.root_key(), depth, 1.0, 0.0).mass);
  }
  state.SetItemsProcessed(state.iterations() * ((std::int64_t{2} << depth) - 1));
}
BENCHMARK(BM_SubtreeMass)->Arg(8)->Arg(12)->Arg(14);

void BM_FirstExitFront(benchmark::State& state) {
  const WeightModel model = uniform_pair();
  const double t = static_cast<double>(state.range(0));
  std::uint64_t seed = 0;
  std::size_t nodes = 0;
  for (auto _ : state) {
    const RandomTree tree(model, ++seed);
    const Front f = first_exit_front(tree, t);
    nodes += f.nodes.size();
    benchmark::DoNotOptimize(f.nodes.data());
  }
  state.counters["front_size"] =
      benchmark::Counter(static_cast<double>(nodes), benchmark::Counter::kAvgIterations);
}
BENCHMARK(BM_FirstExitFront)->Arg(4)->Arg(8)->Arg(12);

void BM_FindAlphaExact(benchmark::State& state) {
  const WeightModel model = mixture();
  for (auto _ : state) benchmark::DoNotOptimize(find_alpha(model).alpha);
}
BENCHMARK(BM_FindAlphaExact);

void BM_FindAlphaSampled(benchmark::State& state) {
  const WeightModel model(IidCount{FixedCount{2}, UniformWeight{0.0, 1.0}});
  FindAlphaOptions opt;
  opt.budget.reps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(find_alpha(model, opt).alpha);
}
BENCHMARK(BM_FindAlphaSampled)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_SmoothingMap(benchmark::State& state) {
  const WeightModel model = uniform_pair();
  const auto grid = log_grid(1e-3, 10.0, 30);
  const auto reps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        smoothing_map([](double t) { return std::exp(-t); }, model, grid, reps, 7).value.data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(reps));
}
BENCHMARK(BM_SmoothingMap)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
