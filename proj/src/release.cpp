#include "nv/release.hpp"

#include <cmath>

#include "nv/errors.hpp"

namespace nv {

FilmParams film_params(const VesicleTypeRegistry& reg, TypeId type, const VectorXd& content, std::size_t layer) {
  const auto& maps = reg.type(type).act_release;
  if (layer >= maps.size()) throw ShapeError("film_params: no activation release map for this layer");
  const VectorXd gb = maps[layer].apply(content);
  const auto w = gb.size() / 2;
  return {gb.head(w), gb.tail(w)};
}

VectorXd release_activation(const VesicleTypeRegistry& reg, const Vesicle& v, const VectorXd& h, std::size_t layer) {
  const FilmParams fp = film_params(reg, v.type, v.content, layer);
  if (fp.gamma.size() != h.size()) throw ShapeError("release_activation: release map width != node width");
  VectorXd delta = fp.gamma.cwiseProduct(h) + fp.beta;
  if (v.internal.budget != 1.0) delta *= v.internal.budget;
  return delta;
}

RankOneDelta release_parameters(const VesicleTypeRegistry& reg, const Vesicle& v, const LayerParams& layer_params,
                                std::size_t layer) {
  const auto& maps = reg.type(v.type).param_release;
  if (layer == 0 || layer > maps.size()) throw ShapeError("release_parameters: layer has no weight matrix");
  const ParamReleaseMap& m = maps[layer - 1];
  if (m.u_map.rows() != layer_params.weight.rows() || m.w_map.rows() != layer_params.weight.cols())
    throw ShapeError("release_parameters: release map does not match the layer shape");
  return {m.u_map * v.content, m.w_map * v.content, m.step * v.internal.budget};
}

void apply_rank_one(LayerParams& p, const RankOneDelta& d) {
  if (d.u.size() != p.weight.rows() || d.w.size() != p.weight.cols())
    throw ShapeError("apply_rank_one: shape mismatch");
  p.weight.noalias() += d.scale * d.u * d.w.transpose();
}

LayerGrad RuleModulation::apply(const LayerGrad& g) const {
  const VectorXd flat = g.flat();
  if (alpha.size() != flat.size() || beta.size() != flat.size())
    throw ShapeError("RuleModulation::apply: gradient size mismatch");
  LayerGrad out = g;
  out.set_flat(alpha.cwiseProduct(flat) + beta);
  return out;
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

RuleModulation release_rule(const VesicleTypeRegistry& reg, const Vesicle& v, const NetworkState& net,
                            std::size_t layer) {
  if (!net.grads_valid()) throw StaleStateError("release_rule: gradients are stale");
  const auto& maps = reg.type(v.type).rule_release;
  if (layer == 0 || layer > maps.size()) throw ShapeError("release_rule: layer has no parameters");
  const RuleReleaseMap& m = maps[layer - 1];
  RuleModulation mod;
  mod.alpha = m.alpha_map.apply(v.content).array() + 1.0;
  mod.beta = m.beta_map.apply(v.content);
  mod.lr_scale = softplus(m.lr_map.apply(v.content)[0]) / softplus(0.0);
  const double b = v.internal.budget;
  if (b != 1.0) {
    mod.alpha = (b * (mod.alpha.array() - 1.0) + 1.0).matrix();
    mod.beta *= b;
    mod.lr_scale = 1.0 + b * (mod.lr_scale - 1.0);
  }
  return mod;
}

void memory_write(ExternalMemory& mem, const VesicleTypeRegistry& reg, const Vesicle& v, double rho) {
  const MatrixXd& proj = reg.type(v.type).memory_proj;
  if (proj.rows() != mem.slot.size()) throw ShapeError("memory_write: projection does not match slot width");
  VectorXd z = proj * v.content;
  if (v.internal.budget != 1.0) z *= v.internal.budget;
  mem.slot = (1.0 - rho) * mem.slot + rho * z;
  ++mem.write_count;
}

VectorXd memory_read_inject(const ExternalMemory& mem, const VectorXd& h, const MatrixXd& q) {
  if (q.rows() != h.size() || q.cols() != mem.slot.size())
    throw ShapeError("memory_read_inject: projection shape mismatch");
  return h + q * mem.slot;
}

VectorXd combined_activation_release(const VesicleTypeRegistry& reg, std::span<const Vesicle* const> docked,
                                     const VectorXd& h, std::size_t layer) {
  VectorXd total = VectorXd::Zero(h.size());
  for (const Vesicle* v : docked) total += release_activation(reg, *v, h, layer);
  return total;
}

ReleaseEffect compute_release(const VesicleTypeRegistry& reg, const Vesicle& v, const NetworkState& net,
                              std::size_t layer, OperatorMask ops) {
  ReleaseEffect e;
  if (ops & kReleaseAct) e.delta_h = release_activation(reg, v, net.activation(layer), layer);
  if (layer >= 1) {
    if (ops & kReleaseParam) e.delta_theta = release_parameters(reg, v, net.layer(layer), layer);
    if (ops & kReleaseRule) e.rule_mod = release_rule(reg, v, net, layer);
  }
  if (ops & kReleaseMemory) {
    VectorXd z = reg.type(v.type).memory_proj * v.content;
    if (v.internal.budget != 1.0) z *= v.internal.budget;
    e.memory_write = std::move(z);
  }
  return e;
}

}  // namespace nv
