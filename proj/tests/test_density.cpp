#include <doctest.h>

#include <cmath>

#include "nv/density.hpp"
#include "nv/errors.hpp"
#include "nv/release.hpp"
#include "support.hpp"

using namespace nv;
using nv::testing::make_fixture;

namespace {

MatrixXd random_stochastic(Eigen::Index n, std::uint64_t seed) {
  RngStream r(seed, stream_id(Phase::Test, 4, 0));
  MatrixXd t(n, n);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.uniform();
  for (Eigen::Index i = 0; i < n; ++i) t.row(i) /= t.row(i).sum();
  return t;
}

}  // namespace

TEST_CASE("one density step against the recursion") {
  DensityField f = DensityField::zeros(3, 1, 2);
  f.rho << 1.0, 2.0, 0.5;
  MatrixXd T(3, 3);
  T << 0.5, 0.5, 0.0,
       0.0, 0.5, 0.5,
       0.0, 0.0, 1.0;
  MatrixXd lambda(3, 1);
  lambda << 0.3, 0.0, 0.0;
  DensityDynamics dyn{{T}, VectorXd::Constant(1, 0.2), lambda, {}};
  const VectorXd want = T.transpose() * f.rho.col(0) - 0.2 * f.rho.col(0) + lambda.col(0);
  CHECK(density_step(f, dyn) == 0);
  CHECK((f.rho.col(0) - want).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(f.total_mass(0) == doctest::Approx(want.sum()));
}

TEST_CASE("mean content mixes by mass") {
  DensityField f = DensityField::zeros(3, 1, 1);
  f.rho << 1.0, 3.0, 0.0;
  f.mean_content[0] << 2.0, -2.0, 0.0;
  MatrixXd T = MatrixXd::Zero(3, 3);
  T(0, 2) = T(1, 2) = T(2, 2) = 1.0;
  DensityDynamics dyn{{T}, VectorXd::Zero(1), MatrixXd::Zero(3, 1), {}};
  density_step(f, dyn);
  CHECK(f.rho(2, 0) == 4.0);
  CHECK(f.mean_content[0](2, 0) == doctest::Approx((1.0 * 2.0 + 3.0 * -2.0) / 4.0));
  CHECK(f.mean_content[0](0, 0) == 0.0);
}

TEST_CASE("emitted mass brings its own content") {
  DensityField f = DensityField::zeros(2, 1, 1);
  MatrixXd T = MatrixXd::Identity(2, 2);
  MatrixXd lambda(2, 1);
  lambda << 0.5, 0.0;
  MatrixXd content(2, 1);
  content << 4.0, 9.0;
  DensityDynamics dyn{{T}, VectorXd::Zero(1), lambda, {content}};
  density_step(f, dyn);
  CHECK(f.mean_content[0](0, 0) == 4.0);
  CHECK(f.mean_content[0](1, 0) == 0.0);
}

TEST_CASE("mass is conserved without emission or decay") {
  DensityField f = DensityField::zeros(6, 2, 1);
  RngStream r(1, 1);
  for (Eigen::Index i = 0; i < f.rho.size(); ++i) f.rho.data()[i] = r.uniform();
  DensityDynamics dyn{{random_stochastic(6, 1), random_stochastic(6, 2)}, VectorXd::Zero(2), MatrixXd::Zero(6, 2), {}};
  const double m0 = f.total_mass(0), m1 = f.total_mass(1);
  for (int t = 0; t < 1000; ++t) density_step(f, dyn);
  CHECK(std::abs(f.total_mass(0) - m0) < 1e-12);
  CHECK(std::abs(f.total_mass(1) - m1) < 1e-12);
  CHECK((f.rho.array() >= 0.0).all());
}

TEST_CASE("negative mass is clamped and counted") {
  DensityField f = DensityField::zeros(2, 1, 1);
  f.rho << 1.0, 0.0;
  MatrixXd T(2, 2);
  T << 0.0, 1.0,
       0.0, 1.0;
  DensityDynamics dyn{{T}, VectorXd::Constant(1, 0.5), MatrixXd::Zero(2, 1), {}};
  CHECK(density_step(f, dyn) == 1);
  CHECK(f.rho(0, 0) == 0.0);
  CHECK(f.rho(1, 0) == 1.0);
}

TEST_CASE("serial and parallel density steps agree") {
  DensityField a = DensityField::zeros(5, 3, 2);
  RngStream r(2, 2);
  for (Eigen::Index i = 0; i < a.rho.size(); ++i) a.rho.data()[i] = r.uniform();
  for (auto& c : a.mean_content)
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = r.normal();
  DensityField b = a;
  DensityDynamics dyn{{random_stochastic(5, 3), random_stochastic(5, 4), random_stochastic(5, 5)},
                      VectorXd::Constant(3, 0.1), MatrixXd::Constant(5, 3, 0.05), {}};
  for (int t = 0; t < 50; ++t) {
    density_step(a, dyn, Exec::Serial);
    density_step(b, dyn, Exec::Parallel);
  }
  CHECK(a.rho == b.rho);
  for (int k = 0; k < 3; ++k) CHECK(a.mean_content[k] == b.mean_content[k]);
}

TEST_CASE("expected release is the mass-weighted FiLM delta") {
  const auto f = make_fixture({2, 3, 1});
  DensityField field = DensityField::zeros(3, 1, 3);
  field.rho(1, 0) = 2.5;
  field.mean_content[0].row(1) << 0.3, -0.1, 0.7;
  const VectorXd h = VectorXd::LinSpaced(3, -0.5, 0.5);
  const FilmParams fp = film_params(f.registry, 0, field.mean_content[0].row(1).transpose(), 1);
  const VectorXd want = 2.5 * (fp.gamma.cwiseProduct(h) + fp.beta);
  CHECK((expected_release(field, f.registry, 1, 1, h) - want).cwiseAbs().maxCoeff() < 1e-15);
  const VectorXd half = expected_release(field, f.registry, 1, 1, h, VectorXd::Constant(1, 0.5));
  CHECK((half - 0.5 * want).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(expected_release(field, f.registry, 0, 0, VectorXd::Zero(2)).isZero());
}

TEST_CASE("realizability of the decay-compensated kernel") {
  const auto lazy = ConsistencyScenario::lazy_chain(0.3, 0.2, 5, 10);
  const auto strict = ConsistencyScenario::strict_chain(0.3, 0.2, 5, 10);
  CHECK(realizable(lazy.transition[0], 0.2));
  CHECK_FALSE(realizable(strict.transition[0], 0.2));
  const MatrixXd k = compensated_kernel(lazy.transition[0], 0.2);
  CHECK((k.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-15);
  CHECK((k.array() >= 0.0).all());
  CHECK(k(0, 0) == doctest::Approx(0.3 / 0.8));
}

TEST_CASE("consistency check: serial equals parallel, lazy chain agrees") {
  const auto sc = ConsistencyScenario::lazy_chain(0.3, 0.2, 10, 2000);
  const ConsistencyReport a = consistency_check(sc, 4, Exec::Serial);
  const ConsistencyReport b = consistency_check(sc, 4, Exec::Parallel);
  CHECK(a.max_deviation == b.max_deviation);
  for (std::size_t t = 0; t < a.horizon; ++t) CHECK(a.mean[t] == b.mean[t]);
  CHECK(a.realizable);
  CHECK(a.max_deviation < 4.0);
  CHECK(a.density.size() == 10);
}

TEST_CASE("the strict chain cannot be matched by particles") {
  const auto sc = ConsistencyScenario::strict_chain(0.3, 0.2, 20, 4000);
  const ConsistencyReport rep = consistency_check(sc, 1);
  CHECK_FALSE(rep.realizable);
  CHECK(rep.max_deviation > 3.0);
}

TEST_CASE("inconsistent scenarios are rejected") {
  auto sc = ConsistencyScenario::lazy_chain(0.3, 0.2, 5, 10);
  sc.runs = 1;
  CHECK_THROWS_AS(consistency_check(sc, 1), ConfigError);
  sc = ConsistencyScenario::lazy_chain(0.3, 0.2, 5, 10);
  sc.initial = MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(consistency_check(sc, 1), ConfigError);
}
