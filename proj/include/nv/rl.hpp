#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nv/coupled_sim.hpp"

namespace nv {

// r = -loss - omega_coeff * N
double reward(double loss_value, const VesicleConfig& cfg, double omega_coeff);

// Operator subsets a release action chooses from: every submask of
// `enabled`, including the empty set, in increasing mask order.
std::vector<OperatorMask> operator_subsets(OperatorMask enabled);

struct MoveDecision {
  TypeId type = 0;
  NodeId from = 0;
  NodeId to = 0;
};

struct DockDecision {
  TypeId type = 0;
  NodeId at = 0;
  bool docked = false;
};

struct ReleaseDecision {
  TypeId type = 0;
  NodeId at = 0;
  std::size_t subset = 0;  // index into operator_subsets
};

// Everything the policy chose in one step, with the state it saw.
struct ActionRecord {
  MatrixXd state;          // |V| x input_dim
  std::vector<char> emit;  // node-major |V| x K
  std::vector<MoveDecision> moves;
  std::vector<DockDecision> docks;
  std::vector<ReleaseDecision> releases;
  double log_prob = 0.0;
};

struct PolicySpec {
  int hidden = 8;
  double init_scale = 0.1;
};

// Factored policy. A shared layer z_u = tanh(F x_u + f) embeds every node;
// heads:
//   emit    Bernoulli per (node, type), logit emit_w[k] . z_u + emit_b[k]
//   move    softmax over the migration support, score move_w[k] . z_j
//   dock    Bernoulli, logit dock_w[k] . z_u + dock_b[k]
//   release softmax over operator subsets, logits rel_w[k] z_u + rel_b[k]
class Policy {
 public:
  Policy() = default;
  Policy(const Graph& g, std::size_t num_types, int feature_dim, OperatorMask enabled, const PolicySpec& spec,
         RngStream& rng);

  int input_dim() const noexcept { return input_dim_; }
  int hidden() const noexcept { return hidden_; }
  std::size_t num_types() const noexcept { return num_types_; }
  std::size_t num_subsets() const noexcept { return subsets_.size(); }
  const std::vector<OperatorMask>& subsets() const noexcept { return subsets_; }
  const Graph& graph() const noexcept { return graph_; }

  // x_u = [node features, vesicles at u, N / |V|]
  MatrixXd state(const MatrixXd& features, const VesicleConfig& cfg) const;
  MatrixXd embed(const MatrixXd& state) const;

  double emit_logit(const MatrixXd& z, NodeId u, TypeId k) const;
  VectorXd move_probs(const MatrixXd& z, TypeId k, NodeId from) const;  // over migration_support(from)
  double dock_logit(const MatrixXd& z, NodeId u, TypeId k) const;
  VectorXd release_probs(const MatrixXd& z, NodeId u, TypeId k) const;
  // log-probabilities of choice `c`; shared by sampling and replay so both
  // produce the same bits.
  double move_log_prob_at(const MatrixXd& z, TypeId k, NodeId from, std::size_t c) const;
  double release_log_prob_at(const MatrixXd& z, NodeId u, TypeId k, std::size_t c) const;

  double log_prob(const ActionRecord& a) const;
  // d log_prob / d params, flat layout of params().
  VectorXd grad_log_prob(const ActionRecord& a) const;

  std::size_t num_params() const;
  VectorXd params() const;
  void set_params(const VectorXd& p);

  // Head-level pieces, exposed for finite-difference checks.
  double emit_log_prob(const ActionRecord& a) const;
  double move_log_prob(const ActionRecord& a) const;
  double dock_log_prob(const ActionRecord& a) const;
  double release_log_prob(const ActionRecord& a) const;
  VectorXd emit_grad(const ActionRecord& a) const;
  VectorXd move_grad(const ActionRecord& a) const;
  VectorXd dock_grad(const ActionRecord& a) const;
  VectorXd release_grad(const ActionRecord& a) const;

 private:
  enum Head : unsigned { kEmit = 1, kMove = 2, kDock = 4, kRelease = 8, kAllHeads = 15 };
  double log_prob_heads(const ActionRecord& a, unsigned heads) const;
  VectorXd grad_heads(const ActionRecord& a, unsigned heads) const;
  std::size_t move_choice(NodeId from, NodeId to) const;
  VectorXd move_scores(const MatrixXd& z, TypeId k, NodeId from) const;
  VectorXd release_logits(const MatrixXd& z, NodeId u, TypeId k) const;

  Graph graph_;
  std::size_t num_types_ = 0;
  int input_dim_ = 0;
  int hidden_ = 0;
  std::vector<OperatorMask> subsets_;
  MatrixXd embed_w_;  // hidden x input
  VectorXd embed_b_;
  MatrixXd emit_w_;   // K x hidden
  VectorXd emit_b_;
  MatrixXd move_w_;   // K x hidden
  MatrixXd dock_w_;   // K x hidden
  VectorXd dock_b_;
  MatrixXd rel_w_;    // (K * S) x hidden
  VectorXd rel_b_;
};

// Bernoulli log-probability of `taken` under logit z, computed stably.
double bernoulli_log_prob(double logit, bool taken);

// Delegates every stochastic choice of a CoupledSim step to the policy and
// records it for replay.
class PolicyController final : public VesicleController {
 public:
  explicit PolicyController(const Policy& policy) : policy_(policy) {}

  std::vector<EmissionEvent> emissions(const StepContext& ctx) override;
  std::vector<NodeId> moves(const StepContext& ctx, std::span<const Vesicle> vesicles) override;
  std::vector<char> docks(const StepContext& ctx, std::span<const Vesicle> vesicles) override;
  OperatorMask release_ops(const StepContext& ctx, const Vesicle& v) override;

  // Hands over the record of the step just taken and starts a new one.
  ActionRecord take_record();

 private:
  const Policy& policy_;
  ActionRecord record_;
  MatrixXd embedded_;
};

struct Trajectory {
  std::vector<ActionRecord> actions;
  std::vector<double> rewards;
  std::vector<double> returns;
  double total_reward = 0.0;
};

// R_t = r_t + gamma R_{t+1}, R_T = 0.
std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma);

// Exponential running mean of returns, one entry per time index. The first
// batch initializes it.
class ReturnBaseline {
 public:
  explicit ReturnBaseline(double decay = 0.99) : decay_(decay) {}
  double value(std::size_t t) const { return t < values_.size() ? values_[t] : 0.0; }
  bool initialized() const noexcept { return initialized_; }
  void update(const std::vector<double>& returns);

 private:
  double decay_;
  bool initialized_ = false;
  std::vector<double> values_;
};

struct RlOptions {
  double gamma = 0.99;
  double learning_rate = 0.01;
  double omega_coeff = 0.01;
  std::size_t horizon = 20;
  double baseline_decay = 0.99;
};

// One episode of `horizon` coupled steps from a fresh copy of `env`'s
// initial state, seeded with `episode_seed`, with the policy driving every
// vesicle decision. The episode's event records are appended to `log`
// when given.
Trajectory rl_episode(const CoupledSim& env, const Policy& policy, const RlOptions& opts,
                      const std::function<Batch(std::uint64_t)>& data, std::uint64_t episode_seed,
                      EventLog* log = nullptr);

// phi += lr * sum_t grad log pi(a_t | s_t) (R_t - b_t), then the baseline
// absorbs the new returns. An uninitialized baseline is first set to the
// batch's first trajectory. Returns the norm of the applied step.
double reinforce_update(Policy& policy, const std::vector<Trajectory>& batch, ReturnBaseline& baseline,
                        double learning_rate);

// Single softmax head over a few arms, used for bandit checks.
struct CategoricalHead {
  VectorXd logits;

  VectorXd probs() const;
  std::size_t sample(RngStream& rng) const;
  double log_prob(std::size_t a) const;
  VectorXd grad_log_prob(std::size_t a) const;
};

}  // namespace nv
