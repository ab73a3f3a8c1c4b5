#include "nv/coupled_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "nv/errors.hpp"

namespace nv {

Batch make_batch(const std::vector<int>& widths, std::uint64_t seed, std::uint64_t step) {
  RngStream rng(seed, stream_id(Phase::Data, step, 0));
  Batch b{VectorXd(widths.front()), VectorXd(widths.back())};
  for (Eigen::Index i = 0; i < b.x.size(); ++i) b.x[i] = rng.uniform(-1.0, 1.0);
  const double s = b.x.sum();
  for (Eigen::Index k = 0; k < b.y.size(); ++k) b.y[k] = std::sin(s + static_cast<double>(k));
  return b;
}

std::vector<EmissionEvent> KernelController::emissions(const StepContext& ctx) {
  return sample_emissions(ctx.registry, ctx.features, ctx.options.emission, ctx.seed, ctx.step, ctx.options.exec);
}

std::vector<NodeId> KernelController::moves(const StepContext& ctx, std::span<const Vesicle> vesicles) {
  return sample_moves(ctx.registry, vesicles, ctx.features, ctx.seed, ctx.step, ctx.options.exec);
}

std::vector<char> KernelController::docks(const StepContext& ctx, std::span<const Vesicle> vesicles) {
  return sample_docks(ctx.registry, vesicles, ctx.features, ctx.seed, ctx.step, ctx.options.exec);
}

CoupledSim::CoupledSim(Graph graph, NetworkState net, VesicleTypeRegistry registry, SimOptions options,
                       std::uint64_t seed)
    : graph_(std::move(graph)),
      net_(std::move(net)),
      registry_(std::move(registry)),
      options_(std::move(options)),
      seed_(seed) {
  if (registry_.num_nodes() != graph_.num_nodes()) throw ConfigError("registry was built for a different graph");
  if (net_.memories().size() != graph_.num_nodes()) throw ConfigError("network memory count != graph nodes");
  if (options_.vesicle_every < 1) throw ConfigError("run.vesicle_every: must be >= 1");
  nodes_of_layer_.assign(net_.num_layers() + 1, {});
  for (NodeId u = 0; u < graph_.num_nodes(); ++u) {
    const int layer = graph_.layer_of(u);
    if (static_cast<std::size_t>(layer) > net_.num_layers())
      throw ConfigError("graph.layer_of[" + std::to_string(u) + "]: exceeds the network depth");
    nodes_of_layer_[layer].push_back(u);
  }
  for (const auto& [node, type] : options_.scripted_emission)
    if (node >= graph_.num_nodes() || type >= registry_.num_types())
      throw ConfigError("kernels.scripted_emission: entry out of range");
  std::sort(options_.absorber_nodes.begin(), options_.absorber_nodes.end());
}

LayerHook CoupledSim::memory_hook() const {
  if (!(options_.operators & kReleaseMemory)) return {};
  return [this](std::size_t layer, VectorXd& h) {
    for (NodeId u : nodes_of_layer_[layer]) {
      const ExternalMemory& mem = net_.memories()[u];
      if (mem.write_count == 0) continue;
      h = memory_read_inject(mem, h, registry_.memory_read(u));
    }
  };
}

void CoupledSim::check_finite(double loss_pre, double loss_post) const {
  bool ok = net_.all_finite() && std::isfinite(loss_pre) && std::isfinite(loss_post);
  for (const auto& v : vesicles_.vesicles) ok = ok && v.content.allFinite() && std::isfinite(v.lifetime);
  if (!ok)
    throw NumericalError("non-finite state at step " + std::to_string(step_), log_.to_ndjson());
}

StepReport CoupledSim::step(const Batch& batch) { return step(batch, kernels_); }

StepReport CoupledSim::step(const Batch& batch, VesicleController& controller) {
  const std::uint64_t t = step_;
  StepReport rep;
  rep.step = t;
  last_docked_.clear();

  // Base forward pass and gradients.
  const LayerHook mem_hook = memory_hook();
  forward(net_, batch.x, mem_hook);
  const std::size_t L = net_.num_layers();
  rep.loss_pre = loss(net_.activation(L), batch.y);
  net_.record_loss(rep.loss_pre);
  backward(net_, batch.y);
  rep.loss_post = rep.loss_pre;
  check_finite(rep.loss_pre, rep.loss_post);

  std::vector<LayerGrad> grads;
  for (std::size_t l = 1; l <= L; ++l) grads.push_back(net_.grad(l));
  std::vector<double> lr_scale(L + 1, 1.0);

  const std::size_t n_before = vesicles_.size();
  const bool vesicle_phase = (t % static_cast<std::uint64_t>(options_.vesicle_every)) == 0;
  if (vesicle_phase) {
    const MatrixXd features = feature_table(net_, graph_);
    const StepContext ctx{graph_, net_, registry_, vesicles_, features, options_, seed_, t};

    // Emission.
    std::vector<EmissionEvent> events;
    if (!options_.scripted_emission.empty()) {
      for (const auto& [node, type] : options_.scripted_emission) events.push_back({node, type, 1, 1.0});
    } else {
      events = controller.emissions(ctx);
    }
    for (const auto& e : events) {
      for (std::uint32_t c = 0; c < e.count; ++c) {
        const VesicleId id = vesicles_.allocate_id();
        RngStream rng(seed_, stream_id(Phase::Spawn, t, id));
        Vesicle v = spawn(registry_, e.type, e.node, features.row(e.node).transpose(), rng);
        v.id = id;
        log_.append({t, EventPhase::Emit, static_cast<std::int64_t>(id), static_cast<std::int64_t>(e.node),
                     static_cast<std::int64_t>(e.type), v.lifetime, -1});
        vesicles_.vesicles.push_back(std::move(v));
        ++rep.emissions;
      }
    }

    // Migration.
    const std::vector<NodeId> dest = controller.moves(ctx, vesicles_.vesicles);
    for (std::size_t i = 0; i < vesicles_.size(); ++i) {
      Vesicle& v = vesicles_.vesicles[i];
      log_.append({t, EventPhase::Move, static_cast<std::int64_t>(v.id), static_cast<std::int64_t>(dest[i]),
                   static_cast<std::int64_t>(v.type), 0.0, static_cast<std::int64_t>(v.location)});
      v.location = dest[i];
    }

    // Docking and release.
    const std::vector<char> docked = controller.docks(ctx, vesicles_.vesicles);
    std::vector<std::size_t> dock_idx;
    std::vector<OperatorMask> dock_ops;
    for (std::size_t i = 0; i < vesicles_.size(); ++i) {
      if (!docked[i]) continue;
      const Vesicle& v = vesicles_.vesicles[i];
      dock_idx.push_back(i);
      dock_ops.push_back(controller.release_ops(ctx, v) & options_.operators);
      const double p_dock = registry_.type(v.type).force_dock
                                ? 1.0
                                : docking_probability(registry_, v, features.row(v.location).transpose());
      log_.append({t, EventPhase::Dock, static_cast<std::int64_t>(v.id), static_cast<std::int64_t>(v.location),
                   static_cast<std::int64_t>(v.type), p_dock, -1});
      last_docked_.push_back(v);
    }
    rep.docks = dock_idx.size();

    // Activation release: every vesicle docked at a layer is evaluated
    // against that layer's incoming h, which already carries the release
    // of shallower layers.
    std::map<std::size_t, std::vector<const Vesicle*>> act_docked;
    std::vector<std::vector<RuleModulation>> rule_mods(L + 1);
    for (std::size_t d = 0; d < dock_idx.size(); ++d) {
      const Vesicle& v = vesicles_.vesicles[dock_idx[d]];
      const auto layer = static_cast<std::size_t>(graph_.layer_of(v.location));
      if (dock_ops[d] & kReleaseAct) act_docked[layer].push_back(&v);
      if (layer >= 1 && (dock_ops[d] & kReleaseRule)) rule_mods[layer].push_back(release_rule(registry_, v, net_, layer));
    }
    if (!act_docked.empty()) {
      const auto& [lowest, first] = *act_docked.begin();
      net_.activation_mut(lowest) += combined_activation_release(registry_, first, net_.activation(lowest), lowest);
      forward_tail(net_, lowest, [&](std::size_t layer, VectorXd& h) {
        if (mem_hook) mem_hook(layer, h);
        if (auto it = act_docked.find(layer); it != act_docked.end())
          h += combined_activation_release(registry_, it->second, h, layer);
      });
      rep.loss_post = loss(net_.activation(L), batch.y);
    }

    // Parameter and memory effects in vesicle-id order.
    std::vector<VesicleId> absorbed;
    for (std::size_t d = 0; d < dock_idx.size(); ++d) {
      Vesicle& v = vesicles_.vesicles[dock_idx[d]];
      const auto layer = static_cast<std::size_t>(graph_.layer_of(v.location));
      if (layer >= 1 && (dock_ops[d] & kReleaseParam))
        apply_rank_one(net_.layer_mut(layer), release_parameters(registry_, v, net_.layer(layer), layer));
      if (dock_ops[d] & kReleaseMemory) memory_write(net_.memories()[v.location], registry_, v, options_.rho_write);
      log_.append({t, EventPhase::Release, static_cast<std::int64_t>(v.id), static_cast<std::int64_t>(v.location),
                   static_cast<std::int64_t>(v.type), v.internal.budget, static_cast<std::int64_t>(dock_ops[d])});
      v.internal.budget *= 0.5;
      if (std::binary_search(options_.absorber_nodes.begin(), options_.absorber_nodes.end(), v.location))
        absorbed.push_back(v.id);
    }

    // Decay and absorption.
    const auto removed = decay_step(vesicles_, options_.decay, seed_, t, absorbed);
    for (const auto& r : removed) {
      log_.append({t, EventPhase::Decay, static_cast<std::int64_t>(r.id), static_cast<std::int64_t>(r.node), -1,
                   r.lifetime, r.absorbed ? 1 : 0});
    }
    rep.removals = removed.size();

    // Rule-modulated gradients.
    for (std::size_t l = 1; l <= L; ++l) {
      for (const auto& mod : rule_mods[l]) {
        grads[l - 1] = mod.apply(grads[l - 1]);
        lr_scale[l] *= mod.lr_scale;
      }
    }
  }

  // Parameter update.
  for (std::size_t l = 1; l <= L; ++l) {
    const double lr = lr_scale[l] == 1.0 ? options_.learning_rate : options_.learning_rate * lr_scale[l];
    apply_gradient(net_, l, grads[l - 1], lr);
    log_.append({t, EventPhase::Update, -1, static_cast<std::int64_t>(l), -1, lr, -1});
  }

  rep.n_vesicles = vesicles_.size();
  if (rep.n_vesicles != n_before + rep.emissions - rep.removals)
    throw std::logic_error("vesicle accounting identity violated");
  rep.per_node_counts.assign(graph_.num_nodes(), 0);
  for (const auto& v : vesicles_.vesicles) ++rep.per_node_counts[v.location];
  check_finite(rep.loss_pre, rep.loss_post);
  rep.digest = digest();
  ++step_;
  return rep;
}

std::vector<StepReport> CoupledSim::run(std::size_t steps, const std::function<Batch(std::uint64_t)>& data) {
  std::vector<StepReport> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) out.push_back(step(data(step_)));
  return out;
}

}  // namespace nv
