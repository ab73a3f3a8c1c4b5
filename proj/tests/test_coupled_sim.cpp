#include <doctest.h>

#include <limits>

#include "nv/errors.hpp"
#include "support.hpp"

using namespace nv;
using nv::testing::Fixture;
using nv::testing::make_fixture;

namespace {

const std::vector<int> kWidths{3, 5, 4, 2};

CoupledSim make_sim(const Fixture& f, SimOptions opts, std::uint64_t seed = 1) {
  return CoupledSim(f.graph, f.net, f.registry, std::move(opts), seed);
}

bool same_params(const NetworkState& a, const NetworkState& b) {
  for (std::size_t l = 1; l <= a.num_layers(); ++l)
    if (a.layer(l).weight != b.layer(l).weight || a.layer(l).bias != b.layer(l).bias) return false;
  return true;
}

}  // namespace

TEST_CASE("make_batch is a pure function of (seed, step)") {
  const Batch a = make_batch(kWidths, 3, 9);
  const Batch b = make_batch(kWidths, 3, 9);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.x.size() == 3);
  CHECK(a.y.size() == 2);
  CHECK(a.y[1] == std::sin(a.x.sum() + 1.0));
  CHECK(make_batch(kWidths, 3, 10).x != a.x);
}

TEST_CASE("zero emission reproduces plain SGD bit for bit") {
  const Fixture f = make_fixture(kWidths, 2);
  SimOptions opts;
  opts.emission.frozen = MatrixXd::Zero(4, 1);
  CoupledSim sim = make_sim(f, opts);
  NetworkState ref = f.net;
  for (std::uint64_t t = 0; t < 30; ++t) {
    const Batch b = make_batch(kWidths, 1, t);
    const StepReport r = sim.step(b);
    const double l = sgd_step(ref, b.x, b.y, opts.learning_rate);
    CHECK(r.loss_pre == l);
    CHECK(r.n_vesicles == 0);
    REQUIRE(same_params(sim.net(), ref));
  }
}

TEST_CASE("zero release maps reproduce plain SGD even with live vesicles") {
  const Fixture f = make_fixture(kWidths, 3, 2, 0.0);
  SimOptions opts;
  opts.emission.frozen = MatrixXd::Constant(4, 2, 0.8);
  CoupledSim sim = make_sim(f, opts);
  NetworkState ref = f.net;
  std::size_t docks = 0;
  for (std::uint64_t t = 0; t < 30; ++t) {
    const Batch b = make_batch(kWidths, 1, t);
    docks += sim.step(b).docks;
    sgd_step(ref, b.x, b.y, opts.learning_rate);
    REQUIRE(same_params(sim.net(), ref));
  }
  CHECK(docks > 0);
}

TEST_CASE("serial and parallel execution give identical trajectories") {
  const Fixture f = make_fixture(kWidths, 4, 2);
  SimOptions serial;
  serial.exec = Exec::Serial;
  SimOptions parallel;
  parallel.exec = Exec::Parallel;
  CoupledSim a = make_sim(f, serial, 5);
  CoupledSim b = make_sim(f, parallel, 5);
  for (std::uint64_t t = 0; t < 40; ++t) {
    const Batch batch = make_batch(kWidths, 5, t);
    CHECK(a.step(batch).digest == b.step(batch).digest);
  }
  CHECK(a.log().to_ndjson() == b.log().to_ndjson());
}

TEST_CASE("accounting identity and event-log consistency") {
  const Fixture f = make_fixture(kWidths, 6, 2);
  SimOptions opts;
  opts.absorber_nodes = {3};
  CoupledSim sim = make_sim(f, opts, 2);
  std::size_t n = 0;
  for (std::uint64_t t = 0; t < 60; ++t) {
    const StepReport r = sim.step(make_batch(kWidths, 2, t));
    CHECK(r.n_vesicles == n + r.emissions - r.removals);
    CHECK(sim.log().count(t, EventPhase::Emit) == r.emissions);
    CHECK(sim.log().count(t, EventPhase::Decay) == r.removals);
    CHECK(sim.log().count(t, EventPhase::Dock) == r.docks);
    CHECK(sim.log().count(t, EventPhase::Update) == 3);
    std::size_t total = 0;
    for (int c : r.per_node_counts) total += static_cast<std::size_t>(c);
    CHECK(total == r.n_vesicles);
    n = r.n_vesicles;
  }
  std::size_t absorbed = 0;
  for (const auto& rec : sim.log().records())
    if (rec.phase == EventPhase::Decay && rec.aux == 1) {
      CHECK(rec.node == 3);
      ++absorbed;
    }
  CHECK(absorbed > 0);
}

TEST_CASE("vesicle phases run every k-th step only") {
  const Fixture f = make_fixture(kWidths, 7);
  SimOptions opts;
  opts.vesicle_every = 3;
  opts.emission.frozen = MatrixXd::Constant(4, 1, 2.0);
  CoupledSim sim = make_sim(f, opts);
  for (std::uint64_t t = 0; t < 9; ++t) {
    const StepReport r = sim.step(make_batch(kWidths, 1, t));
    if (t % 3 != 0) {
      CHECK(r.emissions == 0);
      CHECK(r.removals == 0);
    }
  }
  CHECK(sim.log().count(EventPhase::Emit) > 0);
}

TEST_CASE("scripted emission spawns exactly the listed vesicles") {
  const Fixture f = make_fixture(kWidths, 8);
  SimOptions opts;
  opts.scripted_emission = {{1, 0}, {2, 0}};
  CoupledSim sim = make_sim(f, opts);
  CHECK(sim.step(make_batch(kWidths, 1, 0)).emissions == 2);
  opts.scripted_emission = {{9, 0}};
  CHECK_THROWS_AS(make_sim(f, opts), ConfigError);
}

TEST_CASE("non-finite state aborts with a dump") {
  const Fixture f = make_fixture(kWidths, 9);
  SimOptions opts;
  opts.learning_rate = std::numeric_limits<double>::max();
  CoupledSim sim = make_sim(f, opts);
  bool threw = false;
  try {
    for (std::uint64_t t = 0; t < 5; ++t) sim.step(make_batch(kWidths, 1, t));
  } catch (const NumericalError& e) {
    threw = true;
    CHECK_FALSE(e.dump().empty());
  }
  CHECK(threw);
}

TEST_CASE("mismatched components are rejected") {
  const Fixture f = make_fixture(kWidths, 10);
  const Fixture other = make_fixture({3, 2}, 10);
  CHECK_THROWS_AS(CoupledSim(f.graph, f.net, other.registry, SimOptions{}, 1), ConfigError);
  SimOptions bad;
  bad.vesicle_every = 0;
  CHECK_THROWS_AS(CoupledSim(f.graph, f.net, f.registry, bad, 1), ConfigError);
}
