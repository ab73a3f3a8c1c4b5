#include "nv/snn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "nv/errors.hpp"

namespace nv {

bool lif_step(LifNeuron& n, double current, double dt, double now, double refractory) {
  if (now < n.refractory_until) {
    n.u = 0.0;
    return false;
  }
  n.u += (dt / n.tau_m) * (-n.u + current);
  if (n.u >= n.threshold) {
    n.u = 0.0;
    n.refractory_until = now + refractory;
    return true;
  }
  return false;
}

double stdp_impulse(bool pre_spiked, bool post_spiked, double a_plus, double a_minus) {
  if (pre_spiked) return a_plus;
  if (post_spiked) return -a_minus;
  return 0.0;
}

void trace_step(Synapse& s, bool pre_spiked, bool post_spiked, double dt, double a_plus, double a_minus) {
  s.e_trace += (dt / s.tau_e) * (-s.e_trace + stdp_impulse(pre_spiked, post_spiked, a_plus, a_minus));
}

double modulation_strength(const VesicleTypeRegistry& reg, const Vesicle& v) {
  return std::tanh(reg.type(v.type).mod_vec.dot(v.content)) * v.internal.budget;
}

double modulatory_field(const VesicleConfig& cfg, const VesicleTypeRegistry& reg, const Graph& g, const Synapse& s,
                        std::size_t radius) {
  const auto hood = g.synapse_neighborhood(s.post, s.pre, radius);
  double m = 0.0;
  for (const auto& v : cfg.vesicles) {
    if (v.lifetime <= 0.0) continue;
    if (std::binary_search(hood.begin(), hood.end(), v.location)) m += modulation_strength(reg, v);
  }
  return m;
}

double three_factor_update(double eligibility, double modulation, double eta) { return eta * eligibility * modulation; }

double darwin3_plasticity(double stdp_pre, double stdp_post, double stdp_mod, double a_pre, double a_post,
                          double a_mod) {
  return a_pre * stdp_pre + a_post * stdp_post + a_mod * stdp_mod;
}

std::vector<Expiry> VesicleEventScheduler::age_to(VesicleConfig& cfg, double to) {
  if (to < now_)
    throw std::invalid_argument("event scheduler: time went backwards (" + std::to_string(to) + " < " +
                                std::to_string(now_) + ")");
  std::vector<Expiry> out;
  const double gap = to - now_;
  std::vector<Vesicle> kept;
  kept.reserve(cfg.vesicles.size());
  for (auto& v : cfg.vesicles) {
    const double expiry = now_ + v.lifetime;
    v.lifetime -= gap;
    if (v.lifetime <= 0.0)
      out.push_back({v.id, v.location, expiry});
    else
      kept.push_back(std::move(v));
  }
  cfg.vesicles = std::move(kept);
  now_ = to;
  return out;
}

std::size_t VesicleEventScheduler::advance(VesicleConfig& cfg, double to, std::span<const double> event_times,
                                           const std::function<void(double)>& at_event, std::vector<Expiry>* removed) {
  if (to < now_) throw std::invalid_argument("event scheduler: target time is in the past");
  std::size_t calls = 0;
  double last = -std::numeric_limits<double>::infinity();
  for (double t : event_times) {
    if (t < now_) throw std::invalid_argument("event scheduler: event before the current time");
    if (t > to) break;
    if (t == last) continue;
    auto gone = age_to(cfg, t);
    if (removed) removed->insert(removed->end(), gone.begin(), gone.end());
    if (at_event) at_event(t);
    ++calls;
    last = t;
  }
  auto gone = age_to(cfg, to);
  if (removed) removed->insert(removed->end(), gone.begin(), gone.end());
  return calls;
}

Graph random_snn_graph(std::size_t n, double connect_prob, std::uint64_t graph_seed) {
  if (connect_prob < 0.0 || connect_prob > 1.0) throw ConfigError("snn.connect_prob: must lie in [0, 1]");
  RngStream rng(graph_seed, stream_id(Phase::Graph, 0, 0));
  std::vector<Edge> edges;
  for (NodeId pre = 0; pre < n; ++pre)
    for (NodeId post = 0; post < n; ++post)
      if (pre != post && rng.bernoulli(connect_prob)) edges.emplace_back(pre, post);
  return Graph(n, std::move(edges), std::vector<int>(n, 0));
}

SnnSim::SnnSim(Graph graph, VesicleTypeRegistry registry, SnnOptions options, std::uint64_t seed)
    : graph_(std::move(graph)),
      registry_(std::move(registry)),
      options_(std::move(options)),
      seed_(seed),
      scheduler_(0.0) {
  if (!(options_.dt > 0.0)) throw ConfigError("snn.dt: must be positive");
  if (!(options_.tau_m > 0.0)) throw ConfigError("snn.tau_m: must be positive");
  if (!(options_.tau_e > 0.0)) throw ConfigError("snn.tau_e: must be positive");
  if (registry_.num_nodes() != graph_.num_nodes()) throw ConfigError("registry was built for a different graph");
  if (registry_.feature_dim() != kSnnFeatures) throw ConfigError("snn registry must use the SNN feature width");
  const std::size_t n = graph_.num_nodes();
  neurons_.assign(n, LifNeuron{0.0, options_.threshold, options_.tau_m});
  last_spiked_.assign(n, 0);
  recent_spikes_.assign(n, {});
  incoming_.assign(n, {});
  RngStream rng(seed_, stream_id(Phase::Init, 1, 0));
  for (const auto& [pre, post] : graph_.edges()) {
    incoming_[post].push_back(synapses_.size());
    synapses_.push_back({pre, post, rng.uniform(0.0, options_.weight_init), 0.0, options_.tau_e});
    std::vector<char> mask(n, 0);
    for (NodeId u : graph_.synapse_neighborhood(post, pre, options_.radius)) mask[u] = 1;
    neighborhood_.push_back(std::move(mask));
  }
}

MatrixXd SnnSim::features() const {
  MatrixXd f = MatrixXd::Zero(static_cast<Eigen::Index>(neurons_.size()), kSnnFeatures);
  for (std::size_t i = 0; i < neurons_.size(); ++i) {
    f(static_cast<Eigen::Index>(i), 0) = static_cast<double>(recent_spikes_[i].size());
    f(static_cast<Eigen::Index>(i), 1) = neurons_[i].u;
  }
  return f;
}

bool SnnSim::alive_at(const Vesicle& v, double t) const { return v.lifetime - (t - scheduler_.now()) > 0.0; }

void SnnSim::vesicle_event(double t, std::vector<char>& docked, SnnStepReport& rep) {
  for (const auto& e : scheduler_.age_to(vesicles_, t)) {
    log_.append({step_, EventPhase::Decay, static_cast<std::int64_t>(e.id), static_cast<std::int64_t>(e.node), -1,
                 e.time, 0});
    ++rep.removals;
  }
  ++kernel_evaluations_;
  const MatrixXd feats = features();
  for (const auto& ev : sample_emissions(registry_, feats, options_.emission, seed_, step_, options_.exec)) {
    for (std::uint32_t c = 0; c < ev.count; ++c) {
      const VesicleId id = vesicles_.allocate_id();
      RngStream rng(seed_, stream_id(Phase::Spawn, step_, id));
      Vesicle v = spawn(registry_, ev.type, ev.node, feats.row(static_cast<Eigen::Index>(ev.node)).transpose(), rng);
      v.id = id;
      log_.append({step_, EventPhase::Emit, static_cast<std::int64_t>(id), static_cast<std::int64_t>(ev.node),
                   static_cast<std::int64_t>(ev.type), v.lifetime, -1});
      vesicles_.vesicles.push_back(std::move(v));
      ++rep.emissions;
    }
  }
  const auto dest = sample_moves(registry_, vesicles_.vesicles, feats, seed_, step_, options_.exec);
  for (std::size_t i = 0; i < vesicles_.size(); ++i) {
    Vesicle& v = vesicles_.vesicles[i];
    log_.append({step_, EventPhase::Move, static_cast<std::int64_t>(v.id), static_cast<std::int64_t>(dest[i]),
                 static_cast<std::int64_t>(v.type), 0.0, static_cast<std::int64_t>(v.location)});
    v.location = dest[i];
  }
  docked = sample_docks(registry_, vesicles_.vesicles, feats, seed_, step_, options_.exec);
  for (std::size_t i = 0; i < vesicles_.size(); ++i) {
    if (!docked[i]) continue;
    const Vesicle& v = vesicles_.vesicles[i];
    const double p = registry_.type(v.type).force_dock
                         ? 1.0
                         : docking_probability(registry_, v, feats.row(static_cast<Eigen::Index>(v.location)).transpose());
    log_.append({step_, EventPhase::Dock, static_cast<std::int64_t>(v.id), static_cast<std::int64_t>(v.location),
                 static_cast<std::int64_t>(v.type), p, -1});
  }
}

SnnStepReport SnnSim::step() {
  const double t = time();
  const double dt = options_.dt;
  SnnStepReport rep;
  rep.step = step_;
  const std::size_t n = neurons_.size();

  // Neurons.
  std::vector<char> spiked(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed_, stream_id(Phase::SnnInput, step_, i));
    double current = options_.bias_current;
    if (options_.input_rate > 0.0 && rng.bernoulli(options_.input_rate)) current += options_.input_weight;
    for (std::size_t s : incoming_[i])
      if (last_spiked_[synapses_[s].pre]) current += synapses_[s].w;
    spiked[i] = lif_step(neurons_[i], current, dt, t, options_.refractory) ? 1 : 0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& recent = recent_spikes_[i];
    if (spiked[i]) {
      recent.push_back(t);
      spikes_.push_back({t, i});
      ++rep.spikes;
    }
    recent.erase(recent.begin(), std::find_if(recent.begin(), recent.end(),
                                              [&](double s) { return s > t - options_.window; }));
  }
  for (auto& s : synapses_) trace_step(s, spiked[s.pre], spiked[s.post], dt, options_.a_plus, options_.a_minus);

  // Vesicle kernels run only at spike times.
  std::vector<char> docked;
  rep.event = rep.spikes > 0;
  if (rep.event) vesicle_event(t, docked, rep);

  // Plasticity.
  std::vector<double> strength(vesicles_.size(), 0.0);
  std::vector<char> live(vesicles_.size(), 0);
  for (std::size_t v = 0; v < vesicles_.size(); ++v) {
    live[v] = alive_at(vesicles_.vesicles[v], t) ? 1 : 0;
    if (live[v]) strength[v] = modulation_strength(registry_, vesicles_.vesicles[v]);
  }
  for (std::size_t k = 0; k < synapses_.size(); ++k) {
    Synapse& s = synapses_[k];
    const auto& hood = neighborhood_[k];
    double delta = 0.0;
    if (options_.rule == PlasticityRule::ThreeFactor) {
      double m = 0.0;
      for (std::size_t v = 0; v < vesicles_.size(); ++v)
        if (live[v] && hood[vesicles_.vesicles[v].location]) m += strength[v];
      delta = three_factor_update(s.e_trace, m, options_.eta);
    } else {
      double a_mod = 0.0;
      bool mod_spike = false;
      for (std::size_t v = 0; v < docked.size(); ++v) {
        if (docked[v] && hood[vesicles_.vesicles[v].location]) {
          a_mod += strength[v];
          mod_spike = true;
        }
      }
      const double pre_term = spiked[s.pre] ? options_.a_plus : 0.0;
      const double post_term = (spiked[s.post] && !spiked[s.pre]) ? -options_.a_minus : 0.0;
      delta = options_.eta * darwin3_plasticity(pre_term, post_term, mod_spike ? s.e_trace : 0.0, options_.a_pre,
                                                options_.a_post, a_mod);
    }
    if (delta == 0.0) continue;
    s.w += delta;
    ++rep.weight_updates;
    weight_changes_.push_back({step_, s.pre, s.post, delta, s.w});
    log_.append({step_, EventPhase::Update, -1, static_cast<std::int64_t>(s.post), -1, delta,
                 static_cast<std::int64_t>(s.pre)});
    // Independent check straight from the graph and the live population.
    const auto brute = graph_.synapse_neighborhood(s.post, s.pre, options_.radius);
    const bool present = std::any_of(vesicles_.vesicles.begin(), vesicles_.vesicles.end(), [&](const Vesicle& v) {
      return alive_at(v, t) && std::binary_search(brute.begin(), brute.end(), v.location);
    });
    if (!present) ++gating_violations_;
  }

  // Docked vesicles spend half their budget.
  for (std::size_t v = 0; v < docked.size(); ++v)
    if (docked[v]) vesicles_.vesicles[v].internal.budget *= 0.5;

  last_spiked_ = std::move(spiked);
  rep.n_vesicles = vesicles_.size();
  ++step_;
  return rep;
}

void SnnSim::finish() {
  const double t = time();
  for (const auto& e : scheduler_.age_to(vesicles_, t))
    log_.append({step_, EventPhase::Decay, static_cast<std::int64_t>(e.id), static_cast<std::int64_t>(e.node), -1,
                 e.time, 0});
}

std::size_t audit_gating(const EventLog& log, const Graph& g, std::size_t radius, double dt) {
  std::unordered_map<std::int64_t, double> expiry;
  for (const auto& r : log.records())
    if (r.phase == EventPhase::Decay) expiry[r.vesicle] = r.value;
  std::unordered_map<std::int64_t, NodeId> where;
  std::size_t violations = 0;
  for (const auto& r : log.records()) {
    switch (r.phase) {
      case EventPhase::Emit:
      case EventPhase::Move:
        where[r.vesicle] = static_cast<NodeId>(r.node);
        break;
      case EventPhase::Decay:
        where.erase(r.vesicle);
        break;
      case EventPhase::Update: {
        if (r.value == 0.0) break;
        const double t = static_cast<double>(r.step) * dt;
        const auto hood = g.synapse_neighborhood(static_cast<NodeId>(r.node), static_cast<NodeId>(r.aux), radius);
        bool present = false;
        for (const auto& [id, node] : where) {
          const auto it = expiry.find(id);
          const bool alive = it == expiry.end() || t < it->second;
          if (alive && std::binary_search(hood.begin(), hood.end(), node)) {
            present = true;
            break;
          }
        }
        if (!present) ++violations;
        break;
      }
      default:
        break;
    }
  }
  return violations;
}

}  // namespace nv
