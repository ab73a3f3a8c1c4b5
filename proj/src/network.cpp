#include "nv/network.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "nv/errors.hpp"

namespace nv {

double LayerGrad::norm() const {
  return std::sqrt(weight.squaredNorm() + bias.squaredNorm());
}

VectorXd LayerGrad::flat() const {
  VectorXd out(weight.size() + bias.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < weight.rows(); ++r)
    for (Eigen::Index c = 0; c < weight.cols(); ++c) out[k++] = weight(r, c);
  for (Eigen::Index r = 0; r < bias.size(); ++r) out[k++] = bias[r];
  return out;
}

void LayerGrad::set_flat(const VectorXd& flat) {
  if (flat.size() != weight.size() + bias.size()) throw ShapeError("LayerGrad::set_flat: size mismatch");
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < weight.rows(); ++r)
    for (Eigen::Index c = 0; c < weight.cols(); ++c) weight(r, c) = flat[k++];
  for (Eigen::Index r = 0; r < bias.size(); ++r) bias[r] = flat[k++];
}

NetworkState::NetworkState(std::vector<int> widths, std::vector<LayerParams> params,
                           std::size_t num_nodes, int memory_dim, int meta_window)
    : widths_(std::move(widths)),
      params_(std::move(params)),
      memory_dim_(memory_dim),
      meta_window_(meta_window) {
  if (widths_.size() < 2) throw ConfigError("network.widths: need at least input and output widths");
  for (std::size_t i = 0; i < widths_.size(); ++i)
    if (widths_[i] <= 0)
      throw ConfigError("network.widths[" + std::to_string(i) + "]: must be positive");
  if (params_.size() != widths_.size() - 1) throw ConfigError("network: parameter count mismatch");
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    const auto& p = params_[l - 1];
    if (p.weight.rows() != widths_[l] || p.weight.cols() != widths_[l - 1] || p.bias.size() != widths_[l])
      throw ConfigError("network: layer " + std::to_string(l) + " parameter shape mismatch");
  }
  activations_.resize(widths_.size());
  for (std::size_t l = 0; l < widths_.size(); ++l) activations_[l] = VectorXd::Zero(widths_[l]);
  preacts_.resize(params_.size());
  grads_.resize(params_.size());
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    preacts_[l - 1] = VectorXd::Zero(widths_[l]);
    grads_[l - 1].weight = MatrixXd::Zero(widths_[l], widths_[l - 1]);
    grads_[l - 1].bias = VectorXd::Zero(widths_[l]);
  }
  memories_.resize(num_nodes);
  for (auto& m : memories_) m.slot = VectorXd::Zero(memory_dim_);
  meta_ = VectorXd::Zero(meta_window_ > 0 ? 1 : 0);
}

NetworkState NetworkState::init(std::vector<int> widths, double init_scale, std::size_t num_nodes,
                                int memory_dim, int meta_window, RngStream& rng) {
  std::vector<LayerParams> params;
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const int d_in = widths[l - 1];
    const int d_out = widths[l];
    const double a = init_scale > 0.0 ? init_scale : 1.0 / std::sqrt(static_cast<double>(d_in));
    LayerParams p{MatrixXd(d_out, d_in), VectorXd(d_out)};
    for (int r = 0; r < d_out; ++r)
      for (int c = 0; c < d_in; ++c) p.weight(r, c) = rng.uniform(-a, a);
    for (int r = 0; r < d_out; ++r) p.bias[r] = rng.uniform(-a, a);
    params.push_back(std::move(p));
  }
  return NetworkState(std::move(widths), std::move(params), num_nodes, memory_dim, meta_window);
}

LayerParams& NetworkState::layer_mut(std::size_t l) {
  forward_valid_ = false;
  grads_valid_ = false;
  return params_.at(l - 1);
}

void NetworkState::record_loss(double loss_value) {
  if (meta_window_ <= 0) return;
  loss_history_.push_back(loss_value);
  while (static_cast<int>(loss_history_.size()) > meta_window_) loss_history_.pop_front();
  const double sum = std::accumulate(loss_history_.begin(), loss_history_.end(), 0.0);
  meta_[0] = sum / static_cast<double>(loss_history_.size());
}

bool NetworkState::all_finite() const {
  for (const auto& p : params_)
    if (!p.weight.allFinite() || !p.bias.allFinite()) return false;
  for (const auto& h : activations_)
    if (!h.allFinite()) return false;
  for (const auto& m : memories_)
    if (!m.slot.allFinite()) return false;
  return meta_.allFinite();
}

VectorXd layer_forward(const LayerParams& p, const VectorXd& input, bool output_layer, VectorXd* preact) {
  VectorXd z = p.weight * input + p.bias;
  VectorXd h = output_layer ? z : VectorXd(z.array().tanh());
  if (preact) *preact = std::move(z);
  return h;
}

VectorXd forward(NetworkState& net, const VectorXd& x, const LayerHook& hook) {
  if (x.size() != net.widths_.front())
    throw ConfigError("forward: input width " + std::to_string(x.size()) + " != " +
                      std::to_string(net.widths_.front()));
  net.activations_[0] = x;
  if (hook) hook(0, net.activations_[0]);
  net.forward_valid_ = true;
  net.grads_valid_ = false;
  return forward_tail(net, 0, hook);
}

VectorXd forward_tail(NetworkState& net, std::size_t from, const LayerHook& hook) {
  const std::size_t L = net.num_layers();
  for (std::size_t l = from + 1; l <= L; ++l) {
    net.activations_[l] = layer_forward(net.params_[l - 1], net.activations_[l - 1], l == L, &net.preacts_[l - 1]);
    if (hook) hook(l, net.activations_[l]);
  }
  return net.activations_[L];
}

double loss(const VectorXd& yhat, const VectorXd& y) {
  if (yhat.size() != y.size()) throw ShapeError("loss: width mismatch");
  return 0.5 * (yhat - y).squaredNorm() / static_cast<double>(y.size());
}

VectorXd loss_gradient(const VectorXd& yhat, const VectorXd& y) {
  if (yhat.size() != y.size()) throw ShapeError("loss_gradient: width mismatch");
  return (yhat - y) / static_cast<double>(y.size());
}

void backward(NetworkState& net, const VectorXd& y) {
  if (!net.forward_valid_) throw StaleStateError("backward: parameters changed since the last forward pass");
  const std::size_t L = net.num_layers();
  VectorXd dh = loss_gradient(net.activations_[L], y);
  for (std::size_t l = L; l >= 1; --l) {
    VectorXd dz = dh;
    if (l != L) dz.array() *= 1.0 - net.preacts_[l - 1].array().tanh().square();
    auto& g = net.grads_[l - 1];
    g.weight.noalias() = dz * net.activations_[l - 1].transpose();
    g.bias = dz;
    if (l > 1) dh = net.params_[l - 1].weight.transpose() * dz;
  }
  net.grads_valid_ = true;
}

void apply_gradient(NetworkState& net, std::size_t layer, const LayerGrad& g, double lr) {
  auto& p = net.layer_mut(layer);
  p.weight -= lr * g.weight;
  p.bias -= lr * g.bias;
}

void sgd_update(NetworkState& net, double lr) {
  std::vector<LayerGrad> grads;
  for (std::size_t l = 1; l <= net.num_layers(); ++l) grads.push_back(net.grad(l));
  for (std::size_t l = 1; l <= net.num_layers(); ++l) apply_gradient(net, l, grads[l - 1], lr);
}

double sgd_step(NetworkState& net, const VectorXd& x, const VectorXd& y, double lr) {
  const VectorXd yhat = forward(net, x);
  const double value = loss(yhat, y);
  backward(net, y);
  sgd_update(net, lr);
  return value;
}

int feature_dim(const NetworkState& net) { return kBaseFeatures + static_cast<int>(net.meta().size()); }

VectorXd node_features(const NetworkState& net, const Graph& g, NodeId node) {
  const int layer = g.layer_of(node);
  if (layer < 0 || static_cast<std::size_t>(layer) > net.num_layers())
    throw ConfigError("node_features: node " + std::to_string(node) + " maps to layer " +
                      std::to_string(layer) + " outside the network");
  const VectorXd& h = net.activation(layer);
  VectorXd f(feature_dim(net));
  const double mean = h.mean();
  f[0] = mean;
  f[1] = std::sqrt((h.array() - mean).square().mean());
  f[2] = (layer >= 1 && net.grads_valid()) ? net.grad(layer).norm() : 0.0;
  for (Eigen::Index k = 0; k < net.meta().size(); ++k) f[kBaseFeatures + k] = net.meta()[k];
  return f;
}

MatrixXd feature_table(const NetworkState& net, const Graph& g) {
  MatrixXd table(g.num_nodes(), feature_dim(net));
  for (NodeId u = 0; u < g.num_nodes(); ++u) table.row(u) = node_features(net, g, u).transpose();
  return table;
}

}  // namespace nv
