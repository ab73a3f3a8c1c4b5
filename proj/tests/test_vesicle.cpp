#include <doctest.h>

#include <cmath>

#include "nv/errors.hpp"
#include "support.hpp"

using namespace nv;
using nv::testing::make_fixture;
using nv::testing::make_vesicle;

TEST_CASE("default transitions are uniform over the migration support") {
  const auto f = make_fixture({2, 3, 3, 1}, 4, 2);
  CHECK(f.registry.transition_defect() < 1e-12);
  const MatrixXd& T = f.registry.type(0).transition;
  CHECK(T(0, 1) == 1.0);
  CHECK(T(3, 3) == 1.0);
  CHECK(T(0, 2) == 0.0);
}

TEST_CASE("set_transition validates support and row sums") {
  auto f = make_fixture({2, 3, 1}, 4);
  MatrixXd bad = MatrixXd::Zero(3, 3);
  bad(0, 2) = 1.0;
  bad(1, 2) = 1.0;
  bad(2, 2) = 1.0;
  CHECK_THROWS_AS(f.registry.set_transition(0, bad), ConfigError);
  MatrixXd short_row = MatrixXd::Zero(3, 3);
  short_row(0, 1) = 0.9;
  short_row(1, 2) = 1.0;
  short_row(2, 2) = 1.0;
  CHECK_THROWS_AS(f.registry.set_transition(0, short_row), ConfigError);
  CHECK_THROWS_AS(f.registry.set_transition(0, MatrixXd::Identity(2, 2)), ConfigError);
}

TEST_CASE("transition scores give a masked softmax") {
  const Graph g(3, {{0, 1}, {0, 2}}, {0, 1, 1});
  RngStream rng(1, 1);
  RegistrySpec spec;
  auto reg = VesicleTypeRegistry::build(g, {}, kBaseFeatures, spec, rng);
  MatrixXd s = MatrixXd::Zero(3, 3);
  s(0, 1) = std::log(3.0);
  s(0, 0) = 100.0;  // off the support, ignored
  reg.set_transition_scores(0, s);
  CHECK(reg.type(0).transition(0, 1) == doctest::Approx(0.75));
  CHECK(reg.type(0).transition(0, 2) == doctest::Approx(0.25));
  CHECK(reg.type(0).transition(0, 0) == 0.0);
}

TEST_CASE("spawn draws lifetimes by distribution") {
  auto f = make_fixture();
  const VectorXd feat = VectorXd::Zero(f.registry.feature_dim());
  RngStream rng(9, 9);
  for (int i = 0; i < 200; ++i) {
    const Vesicle v = spawn(f.registry, 0, 1, feat, rng);
    CHECK(v.lifetime >= kMinLifetime);
    CHECK(v.internal.budget == 1.0);
    CHECK(v.content.size() == f.registry.content_dim());
    CHECK(v.location == 1);
  }
  f.registry.type_mut(0).lifetime_dist = LifetimeDist::Fixed;
  f.registry.type_mut(0).lifetime_mean = 1.0;
  CHECK(spawn(f.registry, 0, 0, feat, rng).lifetime == 1.0);
}

TEST_CASE("zero content spread makes content deterministic") {
  Graph g = Graph::chain(2);
  RngStream rng(1, 1);
  RegistrySpec spec;
  spec.types[0].content_std = 0.0;
  const auto reg = VesicleTypeRegistry::build(g, {}, kBaseFeatures, spec, rng);
  const VectorXd feat = VectorXd::Constant(kBaseFeatures, 0.5);
  RngStream a(1, 2), b(3, 4);
  const Vesicle va = spawn(reg, 0, 0, feat, a);
  const Vesicle vb = spawn(reg, 0, 0, feat, b);
  CHECK((va.content - reg.type(0).content_mean.apply(feat)).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((va.content - vb.content).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("joint digest tracks vesicle state") {
  const auto f = make_fixture();
  VesicleConfig cfg;
  cfg.vesicles.push_back(make_vesicle(cfg.allocate_id(), 0, 0, VectorXd::Ones(3)));
  const std::uint64_t d0 = joint_state_digest(f.net, cfg);
  CHECK(joint_state_digest(f.net, cfg) == d0);
  cfg.vesicles[0].location = 1;
  CHECK(joint_state_digest(f.net, cfg) != d0);
  CHECK(hex_digest(0x1234).size() == 16);
  CHECK(hex_digest(0x1234) == "0000000000001234");
  CHECK(cfg.find(0) != nullptr);
  CHECK(cfg.find(5) == nullptr);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("", 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a", 1) == 0xaf63dc4c8601ec8cULL);
}
