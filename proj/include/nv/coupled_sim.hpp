#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nv/event_log.hpp"
#include "nv/graph.hpp"
#include "nv/kernels.hpp"
#include "nv/network.hpp"
#include "nv/release.hpp"
#include "nv/vesicle.hpp"

namespace nv {

struct Batch {
  VectorXd x;
  VectorXd y;
};

// Synthetic regression stream: x ~ U(-1, 1)^d_in, y_k = sin(sum(x) + k).
Batch make_batch(const std::vector<int>& widths, std::uint64_t seed, std::uint64_t step);

struct SimOptions {
  EmissionOptions emission;
  // When non-empty, replaces stochastic emission: one vesicle per entry
  // per vesicle step.
  std::vector<std::pair<NodeId, TypeId>> scripted_emission;
  DecayOptions decay;
  std::vector<NodeId> absorber_nodes;
  OperatorMask operators = kAllOperators;
  double rho_write = 0.1;
  double learning_rate = 0.05;
  int vesicle_every = 1;
  Exec exec = Exec::Parallel;
};

struct StepReport {
  std::uint64_t step = 0;
  double loss_pre = 0.0;
  double loss_post = 0.0;
  std::size_t n_vesicles = 0;
  std::size_t emissions = 0;
  std::size_t docks = 0;
  std::size_t removals = 0;
  std::vector<int> per_node_counts;
  std::uint64_t digest = 0;
};

// Read-only view handed to a controller during the vesicle phases.
struct StepContext {
  const Graph& graph;
  const NetworkState& net;
  const VesicleTypeRegistry& registry;
  const VesicleConfig& vesicles;
  const MatrixXd& features;
  const SimOptions& options;
  std::uint64_t seed;
  std::uint64_t step;
};

// Decides the stochastic choices of one step: emission counts, moves,
// dock decisions and which release operators fire.
class VesicleController {
 public:
  virtual ~VesicleController() = default;
  virtual std::vector<EmissionEvent> emissions(const StepContext& ctx) = 0;
  virtual std::vector<NodeId> moves(const StepContext& ctx, std::span<const Vesicle> vesicles) = 0;
  virtual std::vector<char> docks(const StepContext& ctx, std::span<const Vesicle> vesicles) = 0;
  virtual OperatorMask release_ops(const StepContext& ctx, const Vesicle& v) {
    (void)v;
    return ctx.options.operators;
  }
};

// Samples everything from the registry's kernels.
class KernelController final : public VesicleController {
 public:
  std::vector<EmissionEvent> emissions(const StepContext& ctx) override;
  std::vector<NodeId> moves(const StepContext& ctx, std::span<const Vesicle> vesicles) override;
  std::vector<char> docks(const StepContext& ctx, std::span<const Vesicle> vesicles) override;
};

// One run of the coupled network + vesicle process. Owns all mutable state.
class CoupledSim {
 public:
  CoupledSim(Graph graph, NetworkState net, VesicleTypeRegistry registry, SimOptions options, std::uint64_t seed);

  // forward (with memory read-injection) -> backward -> emission -> migration
  // -> docking/release -> decay -> parameter update.
  StepReport step(const Batch& batch);
  StepReport step(const Batch& batch, VesicleController& controller);

  std::vector<StepReport> run(std::size_t steps, const std::function<Batch(std::uint64_t)>& data);

  const Graph& graph() const noexcept { return graph_; }
  const NetworkState& net() const noexcept { return net_; }
  NetworkState& net_mut() noexcept { return net_; }
  const VesicleTypeRegistry& registry() const noexcept { return registry_; }
  VesicleTypeRegistry& registry_mut() noexcept { return registry_; }
  const VesicleConfig& vesicles() const noexcept { return vesicles_; }
  VesicleConfig& vesicles_mut() noexcept { return vesicles_; }
  const SimOptions& options() const noexcept { return options_; }
  const EventLog& log() const noexcept { return log_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t current_step() const noexcept { return step_; }

  // Vesicles (as they were when they docked) from the most recent step.
  const std::vector<Vesicle>& last_docked() const noexcept { return last_docked_; }

  std::uint64_t digest() const { return joint_state_digest(net_, vesicles_); }

 private:
  LayerHook memory_hook() const;
  void check_finite(double loss_pre, double loss_post) const;

  Graph graph_;
  NetworkState net_;
  VesicleTypeRegistry registry_;
  SimOptions options_;
  std::uint64_t seed_;
  std::uint64_t step_ = 0;
  VesicleConfig vesicles_;
  EventLog log_;
  KernelController kernels_;
  std::vector<Vesicle> last_docked_;
  std::vector<std::vector<NodeId>> nodes_of_layer_;
};

}  // namespace nv
