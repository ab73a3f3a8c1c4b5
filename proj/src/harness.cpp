#include "nv/harness.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "nv/errors.hpp"
#include "nv/rl.hpp"

namespace nv {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitNetwork = 0;
constexpr std::uint64_t kInitRegistry = 2;
constexpr std::uint64_t kInitPolicy = 3;

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

LifetimeDist lifetime_dist(const std::string& s) {
  return s == "fixed" ? LifetimeDist::Fixed : LifetimeDist::Exponential;
}

void require_granularity(const ExperimentConfig& cfg, const char* want) {
  if (cfg.graph.granularity != want)
    throw ConfigError("graph.granularity: mode " + cfg.run.mode + " needs a " + want + " graph");
}

std::function<Batch(std::uint64_t)> data_stream(const ExperimentConfig& cfg) {
  return [widths = cfg.network.widths, seed = cfg.run.seed](std::uint64_t step) {
    return make_batch(widths, seed, step);
  };
}

std::vector<std::vector<NodeId>> nodes_by_layer(const Graph& g, std::size_t layers) {
  std::vector<std::vector<NodeId>> out(layers);
  for (NodeId u = 0; u < g.num_nodes(); ++u) out[static_cast<std::size_t>(g.layer_of(u))].push_back(u);
  return out;
}

void write_events(const EventLog& log, const fs::path& out, RunSummary& sum) {
  auto os = open_out(out / "events.log");
  log.write_ndjson(os);
  sum.files.push_back(out / "events.log");
}

void run_particle(const ExperimentConfig& cfg, const fs::path& out, RunSummary& sum) {
  require_granularity(cfg, "layer");
  CoupledSim sim = build_coupled_sim(cfg);
  const auto data = data_stream(cfg);
  auto metrics = open_out(out / "metrics.csv");
  metrics << "step,loss_pre,loss_post,n_vesicles,emissions,docks,removals,digest\n";
  std::ofstream plot;
  if (cfg.run.emit_plots) {
    plot = open_out(out / "plot_counts.csv");
    plot << "step,node,count\n";
  }
  try {
    for (std::size_t t = 0; t < cfg.run.steps; ++t) {
      const StepReport r = sim.step(data(t));
      metrics << r.step << ',' << format_number(r.loss_pre) << ',' << format_number(r.loss_post) << ','
              << r.n_vesicles << ',' << r.emissions << ',' << r.docks << ',' << r.removals << ','
              << hex_digest(r.digest) << '\n';
      if (plot.is_open())
        for (std::size_t u = 0; u < r.per_node_counts.size(); ++u)
          plot << r.step << ',' << u << ',' << r.per_node_counts[u] << '\n';
    }
  } catch (const NumericalError&) {
    write_events(sim.log(), out, sum);
    throw;
  }
  sum.files.push_back(out / "metrics.csv");
  if (plot.is_open()) sum.files.push_back(out / "plot_counts.csv");
  write_events(sim.log(), out, sum);
}

void run_density(const ExperimentConfig& cfg, const fs::path& out, RunSummary& sum) {
  require_granularity(cfg, "layer");
  const Graph g = build_graph(cfg);
  NetworkState net = build_network(cfg, g);
  const VesicleTypeRegistry reg = build_registry(cfg, g, cfg.network.widths, feature_dim(net));
  const auto data = data_stream(cfg);
  const std::size_t V = g.num_nodes();
  const std::size_t K = reg.num_types();

  // Features are frozen at the initial network's response to the first batch.
  forward(net, data(0).x);
  const MatrixXd features = feature_table(net, g);
  const MatrixXd lambda = emission_table(reg, features, cfg.kernels.frozen_emission);
  DensityDynamics dyn = DensityDynamics::from_registry(reg, lambda);
  for (TypeId k = 0; k < K; ++k) {
    MatrixXd c(static_cast<Eigen::Index>(V), reg.content_dim());
    for (NodeId u = 0; u < V; ++u)
      c.row(static_cast<Eigen::Index>(u)) =
          reg.type(k).content_mean.apply(features.row(static_cast<Eigen::Index>(u)).transpose()).transpose();
    dyn.emit_content.push_back(std::move(c));
  }

  DensityField field = DensityField::zeros(V, K, reg.content_dim());
  if (cfg.density.initial) field.rho = *cfg.density.initial;

  const auto layers = nodes_by_layer(g, cfg.network.widths.size());
  auto inject_hook = [&](std::size_t layer, VectorXd& h) {
    const VectorXd h_pre = h;
    for (NodeId u : layers[layer]) {
      std::optional<VectorXd> dock_prob;
      if (cfg.density.fold_dock_prob) {
        VectorXd p(static_cast<Eigen::Index>(K));
        for (TypeId k = 0; k < K; ++k) {
          Vesicle probe;
          probe.type = k;
          probe.location = u;
          probe.content = field.mean_content[k].row(static_cast<Eigen::Index>(u)).transpose();
          p[static_cast<Eigen::Index>(k)] =
              docking_probability(reg, probe, features.row(static_cast<Eigen::Index>(u)).transpose());
        }
        dock_prob = std::move(p);
      }
      h += expected_release(field, reg, u, layer, h_pre, dock_prob);
    }
  };

  auto metrics = open_out(out / "metrics.csv");
  metrics << "step,loss,total_mass,clamped\n";
  std::ofstream plot;
  if (cfg.run.emit_plots) {
    plot = open_out(out / "plot_density.csv");
    plot << "step,node,type,rho,content_norm\n";
  }
  for (std::size_t t = 0; t < cfg.run.steps; ++t) {
    const Batch b = data(t);
    const VectorXd yhat = cfg.density.inject ? forward(net, b.x, inject_hook) : forward(net, b.x);
    const double loss_value = loss(yhat, b.y);
    backward(net, b.y);
    sgd_update(net, cfg.network.learning_rate);
    const std::size_t clamped = density_step(field, dyn, exec_policy(cfg));
    const double mass = field.rho.sum();
    if (!std::isfinite(loss_value) || !std::isfinite(mass) || !net.all_finite())
      throw NumericalError("density: non-finite state at step " + std::to_string(t), "");
    metrics << t << ',' << format_number(loss_value) << ',' << format_number(mass) << ',' << clamped << '\n';
    if (plot.is_open())
      for (NodeId u = 0; u < V; ++u)
        for (TypeId k = 0; k < K; ++k) {
          const auto uu = static_cast<Eigen::Index>(u);
          const auto kk = static_cast<Eigen::Index>(k);
          plot << t << ',' << u << ',' << k << ',' << format_number(field.rho(uu, kk)) << ','
               << format_number(field.mean_content[k].row(uu).norm()) << '\n';
        }
  }
  sum.files.push_back(out / "metrics.csv");
  if (plot.is_open()) sum.files.push_back(out / "plot_density.csv");
  write_events(EventLog{}, out, sum);
}

void run_consistency(const ExperimentConfig& cfg, const fs::path& out, RunSummary& sum) {
  const ConsistencyScenario sc = build_scenario(cfg);
  const ConsistencyReport rep = consistency_check(sc, cfg.run.seed, exec_policy(cfg));

  auto metrics = open_out(out / "metrics.csv");
  metrics << "step,node,type,density,mean,std_error,z\n";
  for (std::size_t t = 0; t < rep.horizon; ++t) {
    for (Eigen::Index u = 0; u < rep.density[t].rows(); ++u)
      for (Eigen::Index k = 0; k < rep.density[t].cols(); ++k) {
        const double rho = rep.density[t](u, k);
        const double m = rep.mean[t](u, k);
        const double se = rep.std_error[t](u, k);
        const double z = se > 0.0 ? std::abs(m - rho) / se
                                  : (m == rho ? 0.0 : std::numeric_limits<double>::infinity());
        metrics << (t + 1) << ',' << u << ',' << k << ',' << format_number(rho) << ',' << format_number(m) << ','
                << format_number(se) << ',' << format_number(z) << '\n';
      }
  }
  sum.files.push_back(out / "metrics.csv");

  nlohmann::ordered_json j;
  j["scenario"] = cfg.consistency.scenario;
  j["runs"] = rep.runs;
  j["horizon"] = rep.horizon;
  j["realizable"] = rep.realizable;
  j["max_deviation"] = rep.max_deviation;
  j["worst_node"] = rep.worst_node;
  j["worst_type"] = rep.worst_type;
  j["worst_step"] = rep.worst_step;
  j["threshold"] = 3.0;
  j["within_threshold"] = rep.max_deviation < 3.0;
  auto os = open_out(out / "consistency_report.json");
  os << j.dump(2) << '\n';
  sum.files.push_back(out / "consistency_report.json");
  write_events(EventLog{}, out, sum);
}

void run_snn(const ExperimentConfig& cfg, const fs::path& out, RunSummary& sum) {
  require_granularity(cfg, "neuron");
  const Graph g = build_graph(cfg);
  VesicleTypeRegistry reg = build_registry(cfg, g, {}, kSnnFeatures);
  const SnnOptions opts = build_snn_options(cfg);
  SnnSim sim(g, std::move(reg), opts, cfg.run.seed);

  auto metrics = open_out(out / "metrics.csv");
  metrics << "step,time,spikes,n_vesicles,emissions,removals,weight_updates,event\n";
  for (std::size_t t = 0; t < cfg.run.steps; ++t) {
    const SnnStepReport r = sim.step();
    metrics << r.step << ',' << format_number(static_cast<double>(r.step) * opts.dt) << ',' << r.spikes << ','
            << r.n_vesicles << ',' << r.emissions << ',' << r.removals << ',' << r.weight_updates << ','
            << (r.event ? 1 : 0) << '\n';
  }
  sim.finish();
  sum.files.push_back(out / "metrics.csv");

  if (cfg.run.emit_plots) {
    auto spikes = open_out(out / "plot_spikes.csv");
    spikes << "time,neuron\n";
    for (const auto& s : sim.spikes()) spikes << format_number(s.time) << ',' << s.neuron << '\n';
    auto weights = open_out(out / "plot_weights.csv");
    weights << "step,pre,post,delta,w\n";
    for (const auto& w : sim.weight_changes())
      weights << w.step << ',' << w.pre << ',' << w.post << ',' << format_number(w.delta) << ','
              << format_number(w.w) << '\n';
    sum.files.push_back(out / "plot_spikes.csv");
    sum.files.push_back(out / "plot_weights.csv");
  }

  nlohmann::ordered_json j;
  j["steps"] = cfg.run.steps;
  j["spikes"] = sim.spikes().size();
  j["weight_updates"] = sim.weight_changes().size();
  j["kernel_evaluations"] = sim.kernel_evaluations();
  j["inline_violations"] = sim.gating_violations();
  j["audit_violations"] = audit_gating(sim.log(), g, opts.radius, opts.dt);
  auto os = open_out(out / "snn_report.json");
  os << j.dump(2) << '\n';
  sum.files.push_back(out / "snn_report.json");
  write_events(sim.log(), out, sum);
}

void run_rl(const ExperimentConfig& cfg, const fs::path& out, RunSummary& sum) {
  require_granularity(cfg, "layer");
  const CoupledSim env = build_coupled_sim(cfg);
  RngStream init(cfg.run.seed, stream_id(Phase::Init, kInitPolicy, 0));
  Policy policy(env.graph(), env.registry().num_types(), feature_dim(env.net()), env.options().operators,
                PolicySpec{cfg.rl.hidden, cfg.rl.init_scale}, init);
  const RlOptions opts{cfg.rl.gamma, cfg.rl.learning_rate, cfg.rl.omega_coeff, cfg.rl.horizon,
                       cfg.rl.baseline_decay};
  ReturnBaseline baseline(opts.baseline_decay);
  const auto data = data_stream(cfg);
  EventLog log;

  auto metrics = open_out(out / "metrics.csv");
  metrics << "update,mean_total_reward,mean_return0,baseline0,step_norm\n";
  for (std::size_t u = 0; u < cfg.run.steps; ++u) {
    std::vector<Trajectory> batch;
    for (std::size_t b = 0; b < cfg.rl.batch; ++b) {
      RngStream s(cfg.run.seed, stream_id(Phase::Policy, u, (std::uint64_t{4} << 40) + b));
      batch.push_back(rl_episode(env, policy, opts, data, s.next_u64(), &log));
    }
    const double norm = reinforce_update(policy, batch, baseline, opts.learning_rate);
    double total = 0.0;
    double ret0 = 0.0;
    for (const auto& tr : batch) {
      total += tr.total_reward;
      ret0 += tr.returns.empty() ? 0.0 : tr.returns.front();
    }
    const double n = static_cast<double>(batch.size());
    metrics << u << ',' << format_number(total / n) << ',' << format_number(ret0 / n) << ','
            << format_number(baseline.value(0)) << ',' << format_number(norm) << '\n';
    if (!policy.params().allFinite())
      throw NumericalError("rl: non-finite policy parameters at update " + std::to_string(u), log.to_ndjson());
  }
  sum.files.push_back(out / "metrics.csv");
  write_events(log, out, sum);
}

}  // namespace

Graph build_graph(const ExperimentConfig& cfg) {
  return Graph(cfg.graph.num_nodes, cfg.graph.edges, cfg.graph.layer_of, cfg.graph.allow_self_loops);
}

NetworkState build_network(const ExperimentConfig& cfg, const Graph& g) {
  RngStream rng(cfg.run.seed, stream_id(Phase::Init, kInitNetwork, 0));
  return NetworkState::init(cfg.network.widths, cfg.network.init_scale, g.num_nodes(), cfg.release.d_m,
                            cfg.network.meta_window, rng);
}

VesicleTypeRegistry build_registry(const ExperimentConfig& cfg, const Graph& g, const std::vector<int>& widths,
                                   int feature_dim) {
  RegistrySpec spec;
  spec.content_dim = cfg.vesicles.content_dim;
  spec.emit_dim = cfg.vesicles.emit_dim;
  spec.dock_dim = cfg.vesicles.dock_dim;
  spec.init_scale = cfg.vesicles.init_scale;
  spec.memory_dim = cfg.release.d_m;
  spec.release_init_scale = cfg.release.init_scale;
  spec.param_step = cfg.release.param_step;
  spec.types.clear();
  for (const auto& t : cfg.vesicles.types) {
    TypeSpec ts;
    ts.lifetime_mean = t.lifetime_mean;
    ts.lifetime_dist = lifetime_dist(t.lifetime_dist);
    ts.decay_rate = t.decay_rate;
    ts.temperature = t.temperature;
    ts.transition = t.transition;
    ts.emit_scale = t.emit_scale;
    ts.dock_scale = t.dock_scale;
    ts.force_dock = t.force_dock;
    ts.content_std = t.content_std;
    ts.mod_scale = t.mod_scale;
    spec.types.push_back(std::move(ts));
  }
  RngStream rng(cfg.run.seed, stream_id(Phase::Init, kInitRegistry, 0));
  return VesicleTypeRegistry::build(g, widths, feature_dim, spec, rng);
}

SimOptions build_sim_options(const ExperimentConfig& cfg) {
  SimOptions o;
  o.emission.max_emit_per_node = cfg.kernels.max_emit_per_node;
  o.emission.frozen = cfg.kernels.frozen_emission;
  o.scripted_emission = cfg.kernels.scripted_emission;
  o.decay.dt = cfg.kernels.dt;
  o.decay.noise_std = cfg.kernels.decay_noise_std;
  o.absorber_nodes = cfg.kernels.absorber_nodes;
  o.operators = (cfg.release.act ? kReleaseAct : 0u) | (cfg.release.param ? kReleaseParam : 0u) |
                (cfg.release.rule ? kReleaseRule : 0u) | (cfg.release.memory ? kReleaseMemory : 0u);
  o.rho_write = cfg.release.rho_write;
  o.learning_rate = cfg.network.learning_rate;
  o.vesicle_every = cfg.run.vesicle_every;
  o.exec = exec_policy(cfg);
  return o;
}

SnnOptions build_snn_options(const ExperimentConfig& cfg) {
  const SnnConfig& c = cfg.snn;
  SnnOptions o;
  o.dt = c.dt;
  o.tau_m = c.tau_m;
  o.tau_e = c.tau_e;
  o.threshold = c.threshold;
  o.refractory = c.refractory;
  o.a_plus = c.a_plus;
  o.a_minus = c.a_minus;
  o.eta = c.eta;
  o.radius = c.radius;
  o.window = c.window;
  o.rule = c.rule == "darwin3" ? PlasticityRule::Darwin3 : PlasticityRule::ThreeFactor;
  o.a_pre = c.a_pre;
  o.a_post = c.a_post;
  o.input_rate = c.input_rate;
  o.input_weight = c.input_weight;
  o.bias_current = c.bias_current;
  o.weight_init = c.weight_init;
  o.emission.max_emit_per_node = cfg.kernels.max_emit_per_node;
  o.emission.frozen = cfg.kernels.frozen_emission;
  o.exec = exec_policy(cfg);
  return o;
}

ConsistencyScenario build_scenario(const ExperimentConfig& cfg) {
  const ConsistencyConfig& c = cfg.consistency;
  if (c.scenario == "lazy_chain") return ConsistencyScenario::lazy_chain(c.lambda0, c.decay, c.horizon, c.runs);
  if (c.scenario == "strict_chain") return ConsistencyScenario::strict_chain(c.lambda0, c.decay, c.horizon, c.runs);

  if (!cfg.kernels.frozen_emission)
    throw ConfigError("kernels.frozen_emission: required by consistency.scenario = config");
  const Graph g = build_graph(cfg);
  // Only the transitions and decay rates of the registry are used.
  const VesicleTypeRegistry reg = build_registry(cfg, g, {}, kBaseFeatures);
  ConsistencyScenario sc;
  sc.decay.resize(static_cast<Eigen::Index>(reg.num_types()));
  for (TypeId k = 0; k < reg.num_types(); ++k) {
    sc.transition.push_back(reg.type(k).transition);
    sc.decay[static_cast<Eigen::Index>(k)] = reg.type(k).decay_rate;
  }
  sc.lambda = *cfg.kernels.frozen_emission;
  sc.initial = MatrixXd::Zero(static_cast<Eigen::Index>(g.num_nodes()), static_cast<Eigen::Index>(reg.num_types()));
  if (cfg.density.initial) {
    if ((cfg.density.initial->array() != cfg.density.initial->array().round()).any())
      throw ConfigError("density.initial: the consistency check needs integer counts");
    sc.initial = *cfg.density.initial;
  }
  sc.horizon = c.horizon;
  sc.runs = c.runs;
  return sc;
}

CoupledSim build_coupled_sim(const ExperimentConfig& cfg) {
  Graph g = build_graph(cfg);
  NetworkState net = build_network(cfg, g);
  VesicleTypeRegistry reg = build_registry(cfg, g, cfg.network.widths, feature_dim(net));
  return CoupledSim(std::move(g), std::move(net), std::move(reg), build_sim_options(cfg), cfg.run.seed);
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

RunSummary run_experiment(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  RunSummary sum;
  sum.mode = cfg.run.mode;
  sum.steps = cfg.run.steps;
  {
    auto os = open_out(out / "resolved_config.json");
    os << dump_config(cfg);
    sum.files.push_back(out / "resolved_config.json");
  }
  const std::string& m = cfg.run.mode;
  if (m == "particle") run_particle(cfg, out, sum);
  else if (m == "density") run_density(cfg, out, sum);
  else if (m == "consistency") run_consistency(cfg, out, sum);
  else if (m == "snn") run_snn(cfg, out, sum);
  else if (m == "rl") run_rl(cfg, out, sum);
  else throw ConfigError("run.mode: unknown mode '" + m + "'");
  return sum;
}

}  // namespace nv
