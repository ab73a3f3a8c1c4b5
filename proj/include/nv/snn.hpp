#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "nv/event_log.hpp"
#include "nv/graph.hpp"
#include "nv/kernels.hpp"
#include "nv/vesicle.hpp"

namespace nv {

struct LifNeuron {
  double u = 0.0;
  double threshold = 1.0;
  double tau_m = 10.0;
  double refractory_until = -std::numeric_limits<double>::infinity();
};

// Forward-Euler membrane update at time `now`. Inside the refractory window
// the potential is held at 0 and the neuron cannot fire. Returns true on a
// spike (u >= threshold), after which u = 0 until now + refractory.
bool lif_step(LifNeuron& n, double current, double dt, double now, double refractory);

struct Synapse {
  NodeId pre = 0;
  NodeId post = 0;
  double w = 0.0;
  double e_trace = 0.0;
  double tau_e = 5.0;
};

struct SpikeEvent {
  double time = 0.0;
  NodeId neuron = 0;
};

// Pair-based impulse: +a_plus on a presynaptic spike, -a_minus on a
// postsynaptic spike without one, else 0.
double stdp_impulse(bool pre_spiked, bool post_spiked, double a_plus, double a_minus);
// e <- e + dt / tau_e * (-e + F)
void trace_step(Synapse& s, bool pre_spiked, bool post_spiked, double dt, double a_plus, double a_minus);

// tanh(a_kappa . c) * budget
double modulation_strength(const VesicleTypeRegistry& reg, const Vesicle& v);
// Sum of modulation_strength over vesicles with positive lifetime located
// in synapse_neighborhood(post, pre, radius).
double modulatory_field(const VesicleConfig& cfg, const VesicleTypeRegistry& reg, const Graph& g, const Synapse& s,
                        std::size_t radius);

double three_factor_update(double eligibility, double modulation, double eta);
double darwin3_plasticity(double stdp_pre, double stdp_post, double stdp_mod, double a_pre, double a_post,
                          double a_mod);

struct Expiry {
  VesicleId id = 0;
  NodeId node = 0;
  double time = 0.0;  // exact time the lifetime reached zero
};

// Ages vesicles only when asked, by the exact time elapsed since the last
// call; kernels run at event times only.
class VesicleEventScheduler {
 public:
  explicit VesicleEventScheduler(double start = 0.0) : now_(start) {}

  double now() const noexcept { return now_; }

  // Subtract (to - now) from every lifetime and remove those at or below 0.
  // Throws std::invalid_argument when `to` is earlier than now().
  std::vector<Expiry> age_to(VesicleConfig& cfg, double to);

  // Walk the sorted `event_times` inside [now, to]: age to each distinct
  // time and call `at_event` there, then age to `to`. Returns the number of
  // `at_event` calls.
  std::size_t advance(VesicleConfig& cfg, double to, std::span<const double> event_times,
                      const std::function<void(double)>& at_event, std::vector<Expiry>* removed = nullptr);

 private:
  double now_;
};

enum class PlasticityRule { ThreeFactor, Darwin3 };

struct SnnOptions {
  double dt = 1.0;
  double tau_m = 10.0;
  double tau_e = 5.0;
  double threshold = 1.0;
  double refractory = 2.0;
  double a_plus = 1.0;
  double a_minus = 0.5;
  double eta = 0.01;
  std::size_t radius = 1;
  double window = 5.0;
  PlasticityRule rule = PlasticityRule::ThreeFactor;
  double a_pre = 0.0;
  double a_post = 0.0;
  double input_rate = 0.1;
  double input_weight = 12.0;
  double bias_current = 0.0;
  double weight_init = 2.0;
  EmissionOptions emission;
  Exec exec = Exec::Parallel;
};

// Directed Erdos-Renyi graph over `n` neurons, edges pre -> post, no
// self-loops, all nodes in layer 0.
Graph random_snn_graph(std::size_t n, double connect_prob, std::uint64_t graph_seed);

// SNN features per neuron: [spike count in the trailing window, u, 0].
constexpr int kSnnFeatures = kBaseFeatures;

struct WeightChange {
  std::uint64_t step = 0;
  NodeId pre = 0;
  NodeId post = 0;
  double delta = 0.0;
  double w = 0.0;
};

struct SnnStepReport {
  std::uint64_t step = 0;
  std::size_t spikes = 0;
  std::size_t n_vesicles = 0;
  std::size_t emissions = 0;
  std::size_t removals = 0;
  std::size_t weight_updates = 0;
  bool event = false;
};

class SnnSim {
 public:
  SnnSim(Graph graph, VesicleTypeRegistry registry, SnnOptions options, std::uint64_t seed);

  SnnStepReport step();
  // Age the population to the current time and log every expiry so the
  // event log is complete.
  void finish();

  const Graph& graph() const noexcept { return graph_; }
  const std::vector<LifNeuron>& neurons() const noexcept { return neurons_; }
  const std::vector<Synapse>& synapses() const noexcept { return synapses_; }
  std::vector<Synapse>& synapses_mut() noexcept { return synapses_; }
  const VesicleConfig& vesicles() const noexcept { return vesicles_; }
  VesicleConfig& vesicles_mut() noexcept { return vesicles_; }
  const VesicleTypeRegistry& registry() const noexcept { return registry_; }
  const std::vector<SpikeEvent>& spikes() const noexcept { return spikes_; }
  const std::vector<WeightChange>& weight_changes() const noexcept { return weight_changes_; }
  const EventLog& log() const noexcept { return log_; }
  std::size_t kernel_evaluations() const noexcept { return kernel_evaluations_; }
  // Nonzero weight changes with no live vesicle in the synapse's
  // neighbourhood, found by an independent brute-force check.
  std::size_t gating_violations() const noexcept { return gating_violations_; }
  std::uint64_t current_step() const noexcept { return step_; }
  double time() const noexcept { return static_cast<double>(step_) * options_.dt; }

 private:
  MatrixXd features() const;
  bool alive_at(const Vesicle& v, double t) const;
  void vesicle_event(double t, std::vector<char>& docked, SnnStepReport& rep);

  Graph graph_;
  VesicleTypeRegistry registry_;
  SnnOptions options_;
  std::uint64_t seed_;
  std::uint64_t step_ = 0;
  std::vector<LifNeuron> neurons_;
  std::vector<Synapse> synapses_;
  std::vector<std::vector<char>> neighborhood_;  // per synapse, node mask
  std::vector<std::vector<std::size_t>> incoming_;
  std::vector<char> last_spiked_;
  std::vector<std::vector<double>> recent_spikes_;  // per neuron, times within the window
  VesicleConfig vesicles_;
  VesicleEventScheduler scheduler_;
  EventLog log_;
  std::vector<SpikeEvent> spikes_;
  std::vector<WeightChange> weight_changes_;
  std::size_t kernel_evaluations_ = 0;
  std::size_t gating_violations_ = 0;
};

// Replays an SNN event log: every update record with a nonzero delta must
// have a vesicle alive and inside synapse_neighborhood(post, pre, radius)
// at that step. Returns the number of violations.
std::size_t audit_gating(const EventLog& log, const Graph& g, std::size_t radius, double dt);

}  // namespace nv
