// Serial reference against the OpenMP path for each data-parallel kernel.
// Arg 0 selects the path (0 serial, 1 parallel), arg 1 the problem size.
#include <benchmark/benchmark.h>

#include <vector>

#include "nv/density.hpp"
#include "nv/kernels.hpp"
#include "nv/vesicle.hpp"

namespace {

using namespace nv;

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

// Layered graph: `nodes` nodes in layers of 8, each wired to the next layer.
Graph layered(std::size_t nodes) {
  std::vector<Edge> edges;
  std::vector<int> layer(nodes);
  for (std::size_t u = 0; u < nodes; ++u) {
    layer[u] = static_cast<int>(u / 8);
    const std::size_t next = (u / 8 + 1) * 8;
    for (std::size_t v = next; v < std::min(next + 8, nodes); ++v) edges.emplace_back(u, v);
  }
  return Graph(nodes, std::move(edges), std::move(layer));
}

struct Setup {
  Graph graph;
  VesicleTypeRegistry registry;
  MatrixXd features;
  std::vector<Vesicle> vesicles;
};

Setup make_setup(std::size_t nodes, std::size_t vesicles) {
  Setup s;
  s.graph = layered(nodes);
  RegistrySpec spec;
  spec.types.assign(2, TypeSpec{});
  spec.types[1].temperature = 0.5;
  RngStream rng(1, stream_id(Phase::Test, 200, 0));
  s.registry = VesicleTypeRegistry::build(s.graph, {}, kBaseFeatures, spec, rng);
  s.features = MatrixXd::Random(static_cast<Eigen::Index>(nodes), kBaseFeatures);
  for (std::size_t i = 0; i < vesicles; ++i) {
    Vesicle v;
    v.id = i;
    v.type = i % 2;
    v.location = i % nodes;
    v.content = VectorXd::Constant(spec.content_dim, 0.1);
    v.lifetime = 3.0;
    s.vesicles.push_back(std::move(v));
  }
  return s;
}

void BM_Emission(benchmark::State& state) {
  const Setup s = make_setup(static_cast<std::size_t>(state.range(1)), 0);
  std::uint64_t step = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_emissions(s.registry, s.features, EmissionOptions{}, 1, step++, exec_of(state)));
}

void BM_Moves(benchmark::State& state) {
  const Setup s = make_setup(256, static_cast<std::size_t>(state.range(1)));
  std::uint64_t step = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_moves(s.registry, s.vesicles, s.features, 1, step++, exec_of(state)));
}

void BM_Docks(benchmark::State& state) {
  const Setup s = make_setup(256, static_cast<std::size_t>(state.range(1)));
  std::uint64_t step = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_docks(s.registry, s.vesicles, s.features, 1, step++, exec_of(state)));
}

void BM_DensityStep(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(1));
  const Setup s = make_setup(nodes, 0);
  const DensityDynamics dyn =
      DensityDynamics::from_registry(s.registry, MatrixXd::Constant(static_cast<Eigen::Index>(nodes), 2, 0.1));
  DensityField field = DensityField::zeros(nodes, 2, s.registry.content_dim());
  for (auto _ : state) benchmark::DoNotOptimize(density_step(field, dyn, exec_of(state)));
}

void BM_Consistency(benchmark::State& state) {
  const auto sc = ConsistencyScenario::lazy_chain(0.3, 0.2, 20, static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(consistency_check(sc, 1, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_Emission)->ArgsProduct({{0, 1}, {64, 1024}});
BENCHMARK(BM_Moves)->ArgsProduct({{0, 1}, {1000, 20000}});
BENCHMARK(BM_Docks)->ArgsProduct({{0, 1}, {1000, 20000}});
BENCHMARK(BM_DensityStep)->ArgsProduct({{0, 1}, {64, 512}});
BENCHMARK(BM_Consistency)->ArgsProduct({{0, 1}, {1000, 10000}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
