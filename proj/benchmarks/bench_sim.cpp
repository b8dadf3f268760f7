#include <benchmark/benchmark.h>

#include "roadcast/sim.hpp"

using namespace roadcast;

namespace {

sim::Scenario desk_scenario(int vehicles, int aps, double duration_s) {
  sim::Scenario sc;
  Rng topo(derive_seed(7, "topology"));
  sc.graph = sim::random_topology(aps, 3, topo);
  sc.vehicle_count = vehicles;
  sc.duration_s = duration_s;
  sc.seed = 7;
  node::ContentItem item;
  item.content_id = "C00";
  item.size_bytes = 2u << 20;
  item.piece_size = 4096;
  item.generation_size = 8;
  sc.contents = {item};
  return sc;
}

}  // namespace

static void BM_RunScenario(benchmark::State& state) {
  sim::Scenario sc = desk_scenario(static_cast<int>(state.range(0)),
                                   static_cast<int>(state.range(1)), 600);
  for (auto _ : state) {
    auto report = sim::run(sc);
    benchmark::DoNotOptimize(report.wireless_bytes);
  }
}
BENCHMARK(BM_RunScenario)->Args({10, 10})->Args({25, 20})->Unit(benchmark::kMillisecond);

static void BM_GenerateMobility(benchmark::State& state) {
  Rng topo(derive_seed(3, "topology"));
  auto graph = sim::random_topology(20, 3, topo);
  for (auto _ : state) {
    Rng rng(11);
    auto trace = sim::generate_mobility(graph, 50, 3600, {10, 60}, {20, 120}, rng);
    benchmark::DoNotOptimize(trace.size());
  }
}
BENCHMARK(BM_GenerateMobility)->Unit(benchmark::kMillisecond);
