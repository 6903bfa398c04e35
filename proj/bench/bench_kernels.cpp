#include <benchmark/benchmark.h>

#include "svytree/design.hpp"
#include "svytree/mc.hpp"
#include "svytree/synth.hpp"
#include "svytree/tree.hpp"

using namespace svytree;

namespace {

const Frame& population() {
  static const Frame frame = synth_population(SynthConfig::reference());
  return frame;
}

const Partition& fitted_tree() {
  static const Partition tree = [] {
    const Frame& f = population();
    const DesignSpec d = DesignFamily::reference().at(f, 2000);
    const SampleDraw s = draw_sample(d, f, 1);
    return grow_tree(f, s, std::vector<std::string>{"industry", "size", "multi", "region"},
                     "teachers", GrowControls{});
  }();
  return tree;
}

void BM_ClassifyRowsSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(classify_rows_serial(fitted_tree(), population()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(population().size()));
}

void BM_ClassifyRowsParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(classify_rows(fitted_tree(), population()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(population().size()));
}

// Replicate loop at n = 1000 with the given thread count.
void BM_ReplicateLoop(benchmark::State& state) {
  SimConfig c;
  c.sample_sizes = {1000};
  c.replicates = 16;
  c.studies = {"teachers"};
  c.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_simulation(population(), c));
  state.SetItemsProcessed(state.iterations() * 16);
}

}  // namespace

BENCHMARK(BM_ClassifyRowsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifyRowsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReplicateLoop)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
