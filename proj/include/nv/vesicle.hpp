#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nv/graph.hpp"
#include "nv/network.hpp"
#include "nv/rng.hpp"

namespace nv {

using TypeId = std::size_t;
using VesicleId = std::uint64_t;

// s in S: residual release budget in [0, 1] and a discrete mode. Every
// dock scales applied effects by `budget` and then halves it.
struct InternalState {
  double budget = 1.0;
  int mode = 0;
};

// v = (c, kappa, l, tau, s) plus a run-unique id for the event log.
struct Vesicle {
  VesicleId id = 0;
  VectorXd content;
  TypeId type = 0;
  NodeId location = 0;
  double lifetime = 0.0;
  InternalState internal;
};

// The multiset V_t. `vesicles` is kept sorted by id.
struct VesicleConfig {
  std::vector<Vesicle> vesicles;
  VesicleId next_id = 0;

  std::size_t size() const noexcept { return vesicles.size(); }
  VesicleId allocate_id() noexcept { return next_id++; }
  const Vesicle* find(VesicleId id) const;
};

struct AffineMap {
  MatrixXd weight;
  VectorXd bias;

  static AffineMap zeros(Eigen::Index out, Eigen::Index in);
  static AffineMap uniform(Eigen::Index out, Eigen::Index in, double scale, RngStream& rng);
  Eigen::Index out_dim() const { return weight.rows(); }
  Eigen::Index in_dim() const { return weight.cols(); }
  VectorXd apply(const VectorXd& x) const;
};

enum class LifetimeDist { Exponential, Fixed };

// Rank-one parameter release for one layer: u = U c, w = V c, step eta.
struct ParamReleaseMap {
  MatrixXd u_map;  // d_out x d_c
  MatrixXd w_map;  // d_in x d_c
  double step = 0.0;
};

// Rule-level release for one layer over the flat gradient layout:
// alpha(c) = 1 + alpha_map(c), beta(c) = beta_map(c),
// lr scale = softplus(lr_map(c)) / softplus(0).
struct RuleReleaseMap {
  AffineMap alpha_map;
  AffineMap beta_map;
  AffineMap lr_map;  // 1 x d_c
};

struct TypeParams {
  VectorXd emit_vec;           // u_kappa
  AffineMap content_mean;      // features -> d_c
  AffineMap content_log_std;   // features -> d_c
  double lifetime_mean = 3.0;
  LifetimeDist lifetime_dist = LifetimeDist::Exponential;
  MatrixXd transition;         // T^(kappa), row-stochastic on the migration mask
  MatrixXd transition_scores;  // log T (masked entries are -inf)
  double temperature = 0.0;    // gamma_kappa
  VectorXd dock_vec;           // w_kappa
  bool force_dock = false;
  std::vector<AffineMap> act_release;        // per layer 0..L: d_c -> 2 * width
  std::vector<ParamReleaseMap> param_release;  // index l-1 for layers 1..L
  std::vector<RuleReleaseMap> rule_release;    // index l-1 for layers 1..L
  MatrixXd memory_proj;        // d_m x d_c
  double decay_rate = 0.1;     // delta_kappa, density/consistency semantics
  VectorXd mod_vec;            // a_kappa (SNN modulation strength)
};

struct TypeSpec {
  double lifetime_mean = 3.0;
  LifetimeDist lifetime_dist = LifetimeDist::Exponential;
  double decay_rate = 0.1;
  double temperature = 0.0;
  std::optional<MatrixXd> transition;
  double emit_scale = 1.0;
  double dock_scale = 1.0;
  bool force_dock = false;
  double content_std = 1.0;
  double mod_scale = 1.0;
};

struct RegistrySpec {
  int content_dim = 4;
  int emit_dim = 4;
  int dock_dim = 4;
  double init_scale = 0.5;
  std::vector<TypeSpec> types{TypeSpec{}};
  int memory_dim = 2;
  double release_init_scale = 0.0;
  double param_step = 0.01;
};

// Every learnable symbol of the vesicle dynamics, per type.
class VesicleTypeRegistry {
 public:
  VesicleTypeRegistry() = default;

  // `widths` are the base-network layer widths; pass an empty vector for
  // graphs without a base network (the SNN overlay), which skips the
  // activation/parameter/rule/memory release maps.
  static VesicleTypeRegistry build(const Graph& g, const std::vector<int>& widths, int feature_dim,
                                   const RegistrySpec& spec, RngStream& rng);

  std::size_t num_types() const noexcept { return types_.size(); }
  int content_dim() const noexcept { return content_dim_; }
  int feature_dim() const noexcept { return feature_dim_; }
  std::size_t num_nodes() const noexcept { return mask_.rows(); }
  const TypeParams& type(TypeId k) const { return types_.at(k); }
  TypeParams& type_mut(TypeId k) { return types_.at(k); }

  const AffineMap& emit_encoder() const noexcept { return emit_encoder_; }
  AffineMap& emit_encoder_mut() noexcept { return emit_encoder_; }
  const AffineMap& dock_encoder() const noexcept { return dock_encoder_; }
  AffineMap& dock_encoder_mut() noexcept { return dock_encoder_; }

  // Q_l for node l: node width x d_m.
  const MatrixXd& memory_read(NodeId node) const { return memory_read_.at(node); }
  MatrixXd& memory_read_mut(NodeId node) { return memory_read_.at(node); }

  const BoolMatrix& migration_mask() const noexcept { return mask_; }

  // T = masked row-softmax(scores). Throws ConfigError if a row has no
  // finite score on its support.
  void set_transition_scores(TypeId k, const MatrixXd& scores);
  // Validates zero-outside-mask and unit row sums (1e-12), then stores it.
  void set_transition(TypeId k, const MatrixXd& t);

  // Max over types/rows of |row sum - 1| and of |T| outside the mask.
  double transition_defect() const;

 private:
  int content_dim_ = 0;
  int feature_dim_ = 0;
  AffineMap emit_encoder_;
  AffineMap dock_encoder_;
  std::vector<TypeParams> types_;
  std::vector<MatrixXd> memory_read_;
  BoolMatrix mask_;
};

// Draw content, lifetime and internal state for a new vesicle. The caller
// assigns the id.
Vesicle spawn(const VesicleTypeRegistry& reg, TypeId type, NodeId location, const VectorXd& features,
              RngStream& rng);

constexpr double kMinLifetime = 0.5;

// Stable 64-bit digest of (params, activations, vesicles, memories).
std::uint64_t joint_state_digest(const NetworkState& net, const VesicleConfig& cfg);
std::string hex_digest(std::uint64_t d);

// FNV-1a helpers shared with the config digest.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace nv
