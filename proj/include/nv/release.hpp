#pragma once

#include <optional>
#include <span>

#include "nv/network.hpp"
#include "nv/vesicle.hpp"

namespace nv {

// Release operator channels; a docked vesicle applies a subset of them.
enum OperatorBit : unsigned {
  kReleaseAct = 1u << 0,
  kReleaseParam = 1u << 1,
  kReleaseRule = 1u << 2,
  kReleaseMemory = 1u << 3,
};
using OperatorMask = unsigned;
constexpr OperatorMask kAllOperators = kReleaseAct | kReleaseParam | kReleaseRule | kReleaseMemory;

struct FilmParams {
  VectorXd gamma;
  VectorXd beta;
};

// (gamma, beta) = W_act c + b_act for the given layer.
FilmParams film_params(const VesicleTypeRegistry& reg, TypeId type, const VectorXd& content, std::size_t layer);

// budget * (gamma . h + beta). Throws ShapeError when the map does not
// match the width of h.
VectorXd release_activation(const VesicleTypeRegistry& reg, const Vesicle& v, const VectorXd& h,
                            std::size_t layer);

// Delta theta = scale * u w^T on the layer's weight matrix.
struct RankOneDelta {
  VectorXd u;
  VectorXd w;
  double scale = 0.0;

  MatrixXd dense() const { return scale * u * w.transpose(); }
};

RankOneDelta release_parameters(const VesicleTypeRegistry& reg, const Vesicle& v, const LayerParams& layer_params,
                                std::size_t layer);
void apply_rank_one(LayerParams& p, const RankOneDelta& d);

// g~ = alpha (.) g + beta on the flat gradient, plus a learning-rate scale.
struct RuleModulation {
  VectorXd alpha;
  VectorXd beta;
  double lr_scale = 1.0;

  LayerGrad apply(const LayerGrad& g) const;
};

double softplus(double x);

// Throws StaleStateError if the network's gradients are not current.
RuleModulation release_rule(const VesicleTypeRegistry& reg, const Vesicle& v, const NetworkState& net,
                            std::size_t layer);

// slot <- (1 - rho) slot + rho * budget * P_kappa c
void memory_write(ExternalMemory& mem, const VesicleTypeRegistry& reg, const Vesicle& v, double rho);
// h + Q slot
VectorXd memory_read_inject(const ExternalMemory& mem, const VectorXd& h, const MatrixXd& q);

// Sum of activation deltas of every docked vesicle, each evaluated against
// the same pre-release h.
VectorXd combined_activation_release(const VesicleTypeRegistry& reg, std::span<const Vesicle* const> docked,
                                     const VectorXd& h, std::size_t layer);

struct ReleaseEffect {
  std::optional<VectorXd> delta_h;
  std::optional<RankOneDelta> delta_theta;
  std::optional<RuleModulation> rule_mod;
  std::optional<VectorXd> memory_write;  // value written before EMA mixing

  bool empty() const { return !delta_h && !delta_theta && !rule_mod && !memory_write; }
};

// All enabled operators for one docked vesicle at `layer`. Parameter and
// rule operators are skipped on the input layer (it has no parameters).
ReleaseEffect compute_release(const VesicleTypeRegistry& reg, const Vesicle& v, const NetworkState& net,
                              std::size_t layer, OperatorMask ops);

}  // namespace nv
