#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "nv/graph.hpp"
#include "nv/rng.hpp"

namespace nv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LayerParams {
  MatrixXd weight;  // d_out x d_in
  VectorXd bias;    // d_out

  std::size_t size() const { return static_cast<std::size_t>(weight.size() + bias.size()); }
};

// Gradient of the loss w.r.t. one layer's parameters. The flat layout
// (weight row-major, then bias) is the one rule-level release operates on.
struct LayerGrad {
  MatrixXd weight;
  VectorXd bias;

  double norm() const;
  VectorXd flat() const;
  void set_flat(const VectorXd& flat);
};

// Per-node external memory slot M_l.
struct ExternalMemory {
  VectorXd slot;
  int write_count = 0;
};

// Layered tanh-affine network plus everything the vesicle overlay reads
// from it. Layer l in [1, L] maps h^(l-1) -> h^(l); hidden layers use tanh,
// the output layer is affine.
class NetworkState {
 public:
  NetworkState() = default;
  NetworkState(std::vector<int> widths, std::vector<LayerParams> params, std::size_t num_nodes,
               int memory_dim, int meta_window);

  // Uniform(-a, a) init; a = init_scale, or 1/sqrt(d_in) when init_scale <= 0.
  static NetworkState init(std::vector<int> widths, double init_scale, std::size_t num_nodes,
                           int memory_dim, int meta_window, RngStream& rng);

  std::size_t num_layers() const noexcept { return params_.size(); }
  const std::vector<int>& widths() const noexcept { return widths_; }
  int width(std::size_t layer) const { return widths_.at(layer); }

  const LayerParams& layer(std::size_t l) const { return params_.at(l - 1); }
  // Mutable access invalidates the cached forward pass and gradients.
  LayerParams& layer_mut(std::size_t l);
  const std::vector<LayerParams>& params() const noexcept { return params_; }

  const VectorXd& activation(std::size_t l) const { return activations_.at(l); }
  VectorXd& activation_mut(std::size_t l) { return activations_.at(l); }
  const VectorXd& preactivation(std::size_t l) const { return preacts_.at(l - 1); }
  const std::vector<VectorXd>& activations() const noexcept { return activations_; }

  const LayerGrad& grad(std::size_t l) const { return grads_.at(l - 1); }
  bool grads_valid() const noexcept { return grads_valid_; }
  bool forward_valid() const noexcept { return forward_valid_; }

  std::vector<ExternalMemory>& memories() noexcept { return memories_; }
  const std::vector<ExternalMemory>& memories() const noexcept { return memories_; }
  int memory_dim() const noexcept { return memory_dim_; }

  // Meta state m_t: running mean of the last `meta_window` recorded losses.
  const VectorXd& meta() const noexcept { return meta_; }
  void record_loss(double loss);

  bool all_finite() const;

 private:
  friend VectorXd forward_tail(NetworkState&, std::size_t, const std::function<void(std::size_t, VectorXd&)>&);
  friend VectorXd forward(NetworkState&, const VectorXd&, const std::function<void(std::size_t, VectorXd&)>&);
  friend void backward(NetworkState&, const VectorXd&);

  std::vector<int> widths_;
  std::vector<LayerParams> params_;
  std::vector<VectorXd> preacts_;
  std::vector<VectorXd> activations_;
  std::vector<LayerGrad> grads_;
  bool forward_valid_ = false;
  bool grads_valid_ = false;
  std::vector<ExternalMemory> memories_;
  int memory_dim_ = 0;
  int meta_window_ = 16;
  std::deque<double> loss_history_;
  VectorXd meta_;
};

// Hook invoked on h^(l) right after it is computed, before layer l+1 reads it.
using LayerHook = std::function<void(std::size_t layer, VectorXd& h)>;

VectorXd layer_forward(const LayerParams& p, const VectorXd& input, bool output_layer,
                       VectorXd* preact = nullptr);

// Plain forward pass; stores h^(0..L). Throws ConfigError on width mismatch.
VectorXd forward(NetworkState& net, const VectorXd& x, const LayerHook& hook = {});
// Recompute layers from+1..L from the stored h^(from).
VectorXd forward_tail(NetworkState& net, std::size_t from, const LayerHook& hook = {});

// 1/2 ||yhat - y||^2 / d
double loss(const VectorXd& yhat, const VectorXd& y);
VectorXd loss_gradient(const VectorXd& yhat, const VectorXd& y);

// Reverse-mode gradients of loss(h^(L), y). Throws StaleStateError when the
// parameters changed after the last forward pass.
void backward(NetworkState& net, const VectorXd& y);

// theta^(l) <- theta^(l) - lr * g
void apply_gradient(NetworkState& net, std::size_t layer, const LayerGrad& g, double lr);
void sgd_update(NetworkState& net, double lr);

// Plain-SGD reference step: forward, backward, update. Returns the loss.
double sgd_step(NetworkState& net, const VectorXd& x, const VectorXd& y, double lr);

// [mean(h), std(h), grad_norm, m_t...] for the layer the node maps to.
// grad_norm is 0 for the input layer and whenever gradients are stale.
constexpr int kBaseFeatures = 3;
int feature_dim(const NetworkState& net);
VectorXd node_features(const NetworkState& net, const Graph& g, NodeId node);
// One row per node.
MatrixXd feature_table(const NetworkState& net, const Graph& g);

}  // namespace nv
