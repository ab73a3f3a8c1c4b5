#include <doctest.h>

#include <cmath>

#include "nv/errors.hpp"
#include "nv/network.hpp"

using namespace nv;

namespace {

// Loss from scratch: tanh hidden layers, affine output, 1/2 mean square.
double reference_loss(const std::vector<LayerParams>& p, const VectorXd& x, const VectorXd& y) {
  VectorXd h = x;
  for (std::size_t l = 0; l < p.size(); ++l) {
    VectorXd a = p[l].weight * h + p[l].bias;
    h = l + 1 == p.size() ? a : VectorXd(a.array().tanh());
  }
  return 0.5 * (h - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("loss value") {
  VectorXd yhat(2), y(2);
  yhat << 1.0, 2.0;
  y << 0.0, 0.0;
  CHECK(loss(yhat, y) == doctest::Approx(1.25).epsilon(1e-15));
}

TEST_CASE("backprop matches central differences of an independent forward") {
  RngStream rng(2, stream_id(Phase::Test, 1, 0));
  NetworkState net = NetworkState::init({3, 4, 2}, 0.0, 3, 2, 0, rng);
  VectorXd x(3), y(2);
  x << 0.3, -0.7, 0.5;
  y << 0.1, -0.2;
  forward(net, x);
  backward(net, y);
  std::vector<LayerParams> p = net.params();
  const double eps = 1e-5;
  for (std::size_t l = 0; l < p.size(); ++l) {
    VectorXd fd(static_cast<Eigen::Index>(p[l].size()));
    Eigen::Index idx = 0;
    auto probe = [&](double& theta) {
      const double keep = theta;
      theta = keep + eps;
      const double up = reference_loss(p, x, y);
      theta = keep - eps;
      const double down = reference_loss(p, x, y);
      theta = keep;
      fd[idx++] = (up - down) / (2 * eps);
    };
    for (Eigen::Index r = 0; r < p[l].weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p[l].weight.cols(); ++c) probe(p[l].weight(r, c));
    for (Eigen::Index r = 0; r < p[l].bias.size(); ++r) probe(p[l].bias[r]);
    const VectorXd g = net.grad(l + 1).flat();
    CHECK((g - fd).norm() / std::max(g.norm(), 1e-12) < 1e-6);
  }
}

TEST_CASE("sgd_step is forward, backward, update") {
  RngStream rng(3, stream_id(Phase::Test, 1, 1));
  NetworkState a = NetworkState::init({2, 3, 1}, 0.0, 3, 2, 0, rng);
  NetworkState b = a;
  VectorXd x(2), y(1);
  x << 0.2, 0.4;
  y << 1.0;
  const double l = sgd_step(a, x, y, 0.1);
  const VectorXd yhat = forward(b, x);
  CHECK(l == loss(yhat, y));
  backward(b, y);
  for (std::size_t k = 1; k <= b.num_layers(); ++k) apply_gradient(b, k, b.grad(k), 0.1);
  for (std::size_t k = 1; k <= a.num_layers(); ++k) {
    CHECK(a.layer(k).weight == b.layer(k).weight);
    CHECK(a.layer(k).bias == b.layer(k).bias);
  }
}

TEST_CASE("backward after a parameter change is refused") {
  RngStream rng(1, 1);
  NetworkState net = NetworkState::init({2, 2}, 0.0, 2, 2, 0, rng);
  VectorXd x = VectorXd::Ones(2), y = VectorXd::Zero(2);
  forward(net, x);
  net.layer_mut(1).weight(0, 0) += 1.0;
  CHECK_THROWS_AS(backward(net, y), StaleStateError);
  CHECK_THROWS_AS(forward(net, VectorXd::Ones(3)), ConfigError);
}

TEST_CASE("meta state is the windowed mean loss") {
  RngStream rng(1, 1);
  NetworkState net = NetworkState::init({2, 2}, 0.0, 2, 2, 2, rng);
  net.record_loss(1.0);
  net.record_loss(3.0);
  CHECK(net.meta()[0] == 2.0);
  net.record_loss(5.0);
  CHECK(net.meta()[0] == 4.0);
  CHECK(feature_dim(net) == kBaseFeatures + 1);
}

TEST_CASE("input-layer features carry no gradient norm") {
  RngStream rng(1, 1);
  NetworkState net = NetworkState::init({2, 3, 1}, 0.0, 3, 2, 0, rng);
  const Graph g = Graph::chain(3);
  VectorXd x(2), y(1);
  x << 1.0, -1.0;
  y << 0.0;
  forward(net, x);
  backward(net, y);
  const MatrixXd f = feature_table(net, g);
  CHECK(f.rows() == 3);
  CHECK(f(0, 2) == 0.0);
  CHECK(f(1, 2) == doctest::Approx(net.grad(1).norm()));
  CHECK(f(0, 0) == doctest::Approx(0.0));
}
