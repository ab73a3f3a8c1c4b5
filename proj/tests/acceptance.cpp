// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "nv/cli.hpp"
#include "nv/coupled_sim.hpp"
#include "nv/density.hpp"
#include "nv/kernels.hpp"
#include "nv/rl.hpp"
#include "nv/snn.hpp"
#include "support.hpp"

using namespace nv;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr std::size_t kNoopSteps = 100;
constexpr double kNoopSeconds = 5.0;
constexpr std::size_t kFdNets = 10;
constexpr std::size_t kFdMaxParams = 64;
constexpr double kFdEps = 1e-5;
constexpr double kFdRelTol = 1e-6;
constexpr double kFdSeconds = 5.0;
constexpr std::uint64_t kEmitSteps = 100000;
constexpr double kEmitSigmas = 3.0;
constexpr std::size_t kMoveDraws = 100000;
constexpr double kChiAlpha = 0.001;
constexpr double kKernelSeconds = 30.0;
constexpr std::size_t kMeanFieldRuns = 10000;
constexpr std::size_t kMeanFieldHorizon = 20;
constexpr double kMeanFieldSigmas = 3.0;
constexpr double kMeanFieldSeconds = 120.0;
constexpr std::size_t kMassSteps = 10000;
constexpr double kMassTol = 1e-12;
constexpr std::size_t kFilmSteps = 50;
constexpr std::size_t kSnnSteps = 2000;
constexpr std::size_t kSnnQuietSteps = 10000;
constexpr std::size_t kSpikeTrains = 100;
constexpr int kTrainSteps = 200;
constexpr double kHeadRelTol = 1e-6;
constexpr std::size_t kBanditEpisodes = 1000000;
constexpr double kBanditAbsTol = 1e-2;
constexpr std::size_t kBanditMaxUpdates = 2000;
constexpr double kBanditTarget = 0.95;
constexpr double kBanditLr = 0.1;
constexpr double kRlSeconds = 120.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool same_params(const NetworkState& a, const NetworkState& b) {
  for (std::size_t l = 1; l <= a.num_layers(); ++l)
    if (a.layer(l).weight != b.layer(l).weight || a.layer(l).bias != b.layer(l).bias) return false;
  return true;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Both no-op limits track plain SGD bit for bit.
Outcome noop_limits() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<int> widths{4, 8, 8, 2};
  bool ok = true;
  std::size_t docks = 0;
  for (int variant = 0; variant < 2; ++variant) {
    const auto f = nv::testing::make_fixture(widths, 21 + variant, 2, variant == 0 ? 0.1 : 0.0);
    SimOptions opts;
    opts.emission.frozen = MatrixXd::Constant(4, 2, variant == 0 ? 0.0 : 0.8);
    CoupledSim sim(f.graph, f.net, f.registry, opts, 3);
    NetworkState ref = f.net;
    for (std::uint64_t t = 0; t < kNoopSteps; ++t) {
      const Batch b = make_batch(widths, 3, t);
      const StepReport r = sim.step(b);
      const double l = sgd_step(ref, b.x, b.y, opts.learning_rate);
      if (variant == 1) docks += r.docks;
      ok = ok && r.loss_pre == l && same_params(sim.net(), ref);
    }
  }
  const double s = elapsed(t0);
  return {ok && docks > 0 && s < kNoopSeconds,
          fmt("zero emission and zero release maps bitwise equal to SGD over %g steps (%g docks in the second)",
              kNoopSteps, static_cast<double>(docks))};
}

double reference_loss(const std::vector<LayerParams>& p, const VectorXd& x, const VectorXd& y) {
  VectorXd h = x;
  for (std::size_t l = 0; l < p.size(); ++l) {
    VectorXd a = p[l].weight * h + p[l].bias;
    h = l + 1 == p.size() ? a : VectorXd(a.array().tanh());
  }
  return 0.5 * (h - y).squaredNorm() / static_cast<double>(y.size());
}

// 2. Backprop against central differences of an independent forward pass.
Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  RngStream shape(5, stream_id(Phase::Test, 100, 0));
  double worst = 0.0;
  std::size_t nets = 0;
  while (nets < kFdNets) {
    std::vector<int> widths(2 + shape.next_u64() % 3);
    for (int& w : widths) w = 1 + static_cast<int>(shape.next_u64() % 5);
    std::size_t n = 0;
    for (std::size_t l = 1; l < widths.size(); ++l) n += static_cast<std::size_t>(widths[l] * (widths[l - 1] + 1));
    if (n > kFdMaxParams) continue;
    RngStream rng(nets, stream_id(Phase::Test, 100, 1));
    NetworkState net = NetworkState::init(widths, 0.0, widths.size(), 0, 0, rng);
    VectorXd x(widths.front()), y(widths.back());
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    for (auto& v : y) v = rng.uniform(-1.0, 1.0);
    forward(net, x);
    backward(net, y);
    std::vector<LayerParams> p = net.params();
    VectorXd g(static_cast<Eigen::Index>(n)), fd(static_cast<Eigen::Index>(n));
    Eigen::Index idx = 0;
    for (std::size_t l = 0; l < p.size(); ++l) {
      g.segment(idx, static_cast<Eigen::Index>(p[l].size())) = net.grad(l + 1).flat();
      auto probe = [&](double& theta) {
        const double keep = theta;
        theta = keep + kFdEps;
        const double up = reference_loss(p, x, y);
        theta = keep - kFdEps;
        const double down = reference_loss(p, x, y);
        theta = keep;
        fd[idx++] = (up - down) / (2 * kFdEps);
      };
      for (Eigen::Index r = 0; r < p[l].weight.rows(); ++r)
        for (Eigen::Index c = 0; c < p[l].weight.cols(); ++c) probe(p[l].weight(r, c));
      for (Eigen::Index r = 0; r < p[l].bias.size(); ++r) probe(p[l].bias[r]);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-12));
    ++nets;
  }
  const double s = elapsed(t0);
  return {worst < kFdRelTol && s < kFdSeconds, fmt("worst relative error %.3g over %g nets (tol %g)", worst,
                                                   static_cast<double>(kFdNets), kFdRelTol)};
}

// 3. Emission means and migration frequencies against their formulas.
Outcome kernel_statistics() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto f = nv::testing::make_fixture({3, 5, 4, 2}, 31, 2);
  RngStream fr(3, stream_id(Phase::Test, 101, 0));
  MatrixXd feats(4, f.registry.feature_dim());
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = fr.uniform(-1.0, 1.0);

  EmissionOptions eo;
  eo.max_emit_per_node = 64;
  MatrixXd total = MatrixXd::Zero(4, 2);
  for (std::uint64_t t = 0; t < kEmitSteps; ++t)
    for (const auto& e : sample_emissions(f.registry, feats, eo, 9, t))
      total(static_cast<Eigen::Index>(e.node), static_cast<Eigen::Index>(e.type)) += e.count;
  double worst_z = 0.0;
  const AffineMap& enc = f.registry.emit_encoder();
  for (Eigen::Index u = 0; u < 4; ++u) {
    const VectorXd psi = (enc.weight * feats.row(u).transpose() + enc.bias).array().tanh();
    for (Eigen::Index k = 0; k < 2; ++k) {
      const double lambda = 1.0 / (1.0 + std::exp(-f.registry.type(static_cast<TypeId>(k)).emit_vec.dot(psi)));
      const double n = static_cast<double>(kEmitSteps);
      worst_z = std::max(worst_z, std::abs(total(u, k) / n - lambda) / std::sqrt(lambda / n));
    }
  }

  const Graph g(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, {0, 1, 1, 1, 1});
  RegistrySpec spec;
  spec.types[0].temperature = 0.7;
  RngStream rng(4, stream_id(Phase::Test, 101, 1));
  auto reg = VesicleTypeRegistry::build(g, {}, kBaseFeatures, spec, rng);
  MatrixXd T = MatrixXd::Identity(5, 5);
  T.row(0) << 0.0, 0.1, 0.2, 0.3, 0.4;
  reg.set_transition(0, T);
  MatrixXd mf(5, kBaseFeatures);
  for (Eigen::Index i = 0; i < mf.size(); ++i) mf.data()[i] = fr.uniform(0.0, 2.0);
  std::vector<Vesicle> vs;
  for (VesicleId i = 0; i < kMoveDraws; ++i) vs.push_back(nv::testing::make_vesicle(i, 0, 0, VectorXd::Zero(4)));
  const auto moves = sample_moves(reg, vs, mf, 13, 0);
  std::vector<double> counts(5, 0.0);
  for (NodeId m : moves) counts[m] += 1.0;
  std::vector<double> w(5, 0.0);
  double z = 0.0;
  for (int j = 1; j < 5; ++j) z += w[j] = T(0, j) * std::exp(0.7 * mf(j, 2));
  double chi2 = 0.0;
  for (int j = 1; j < 5; ++j) {
    const double e = w[j] / z * static_cast<double>(kMoveDraws);
    chi2 += (counts[j] - e) * (counts[j] - e) / e;
  }
  const double critical = boost::math::quantile(boost::math::chi_squared(3.0), 1.0 - kChiAlpha);
  const double s = elapsed(t0);
  return {worst_z < kEmitSigmas && counts[0] == 0.0 && chi2 < critical && s < kKernelSeconds,
          fmt("emission worst |z| %.3g (< %g), migration chi2 %.3g", worst_z, kEmitSigmas, chi2) +
              fmt(" (< %.4g)", critical)};
}

// 4. Particle means against the density recursion on the lazy chain.
Outcome mean_field() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sc = ConsistencyScenario::lazy_chain(0.3, 0.2, kMeanFieldHorizon, kMeanFieldRuns);
  const ConsistencyReport rep = consistency_check(sc, 1);
  const double s = elapsed(t0);
  return {rep.realizable && rep.max_deviation < kMeanFieldSigmas && s < kMeanFieldSeconds,
          fmt("max |mean - rho| / se = %.3g over %g runs (< %g)", rep.max_deviation,
              static_cast<double>(rep.runs), kMeanFieldSigmas)};
}

// 5. Mass conservation in density mode and N_t accounting in particle mode.
Outcome mass_conservation() {
  const Graph g(6, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 5}, {4, 5}}, {0, 1, 1, 2, 2, 3});
  const BoolMatrix mask = g.migration_mask();
  RngStream r(8, stream_id(Phase::Test, 102, 0));
  DensityDynamics dyn;
  for (int k = 0; k < 2; ++k) {
    MatrixXd T = MatrixXd::Zero(6, 6);
    for (Eigen::Index i = 0; i < 6; ++i) {
      for (Eigen::Index j = 0; j < 6; ++j)
        if (mask(i, j)) T(i, j) = r.uniform(0.1, 1.0);
      T.row(i) /= T.row(i).sum();
    }
    dyn.transition.push_back(T);
  }
  dyn.decay = VectorXd::Zero(2);
  dyn.lambda = MatrixXd::Zero(6, 2);
  DensityField field = DensityField::zeros(6, 2, 3);
  for (Eigen::Index i = 0; i < field.rho.size(); ++i) field.rho.data()[i] = r.uniform(0.0, 2.0);
  double worst = 0.0;
  std::size_t clamped = 0;
  for (std::size_t t = 0; t < kMassSteps; ++t) {
    const VectorXd before = field.rho.colwise().sum();
    clamped += density_step(field, dyn);
    worst = std::max(worst, (VectorXd(field.rho.colwise().sum()) - before).cwiseAbs().maxCoeff());
  }

  bool accounting = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = nv::testing::make_fixture({3, 5, 4, 2}, 40 + seed, 2);
    SimOptions opts;
    opts.absorber_nodes = {3};
    opts.decay.noise_std = seed % 2 ? 0.3 : 0.0;
    CoupledSim sim(f.graph, f.net, f.registry, opts, seed);
    std::size_t n = 0;
    std::set<std::int64_t> alive;
    for (std::uint64_t t = 0; t < 200; ++t) {
      const StepReport rep = sim.step(make_batch({3, 5, 4, 2}, seed, t));
      const std::size_t births = sim.log().count(t, EventPhase::Emit);
      const std::size_t deaths = sim.log().count(t, EventPhase::Decay);
      accounting = accounting && rep.n_vesicles == n + births - deaths && births == rep.emissions &&
                   deaths == rep.removals;
      n = rep.n_vesicles;
    }
    for (const auto& rec : sim.log().records()) {
      if (rec.phase == EventPhase::Emit) alive.insert(rec.vesicle);
      if (rec.phase == EventPhase::Decay) alive.erase(rec.vesicle);
    }
    std::set<std::int64_t> live;
    for (const auto& v : sim.vesicles().vesicles) live.insert(static_cast<std::int64_t>(v.id));
    accounting = accounting && alive == live;
  }
  return {worst <= kMassTol && clamped == 0 && accounting,
          fmt("worst per-step mass change %.3g over %g steps (tol %g); ", worst, static_cast<double>(kMassSteps),
              kMassTol) +
              (accounting ? "N_t identity holds on 5 logged runs" : "N_t identity broken")};
}

// 6. Forced docking with unit lifetime is a residual FiLM layer.
Outcome film_limit() {
  const std::vector<int> widths{3, 6, 5, 2};
  const Graph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 0}, {1, 1}, {2, 2}, {3, 3}}, {0, 1, 2, 3}, true);
  RngStream nr(6, stream_id(Phase::Test, 103, 0));
  const NetworkState net = NetworkState::init(widths, 0.0, 4, 2, 4, nr);
  RegistrySpec spec;
  spec.content_dim = 3;
  spec.release_init_scale = 0.3;
  spec.types[0].lifetime_dist = LifetimeDist::Fixed;
  spec.types[0].lifetime_mean = 1.0;
  spec.types[0].force_dock = true;
  RngStream rr(6, stream_id(Phase::Test, 103, 1));
  auto reg = VesicleTypeRegistry::build(g, widths, feature_dim(net), spec, rr);
  reg.set_transition(0, MatrixXd::Identity(4, 4));
  SimOptions opts;
  opts.operators = kReleaseAct;
  opts.scripted_emission = {{1, 0}, {2, 0}, {3, 0}};
  CoupledSim sim(g, net, reg, opts, 2);
  bool ok = true;
  std::size_t docks = 0;
  for (std::uint64_t t = 0; t < kFilmSteps; ++t) {
    const std::vector<LayerParams> p = sim.net().params();
    const Batch b = make_batch(widths, 2, t);
    const StepReport rep = sim.step(b);
    docks += rep.docks;
    std::map<std::size_t, VectorXd> content;
    for (const auto& v : sim.last_docked()) content[static_cast<std::size_t>(g.layer_of(v.location))] = v.content;
    std::vector<VectorXd> h{b.x};
    for (std::size_t l = 1; l <= p.size(); ++l) {
      VectorXd z = p[l - 1].weight * h.back() + p[l - 1].bias;
      VectorXd a = l == p.size() ? z : VectorXd(z.array().tanh());
      if (auto it = content.find(l); it != content.end()) {
        const AffineMap& m = reg.type(0).act_release[l];
        const VectorXd gb = m.weight * it->second + m.bias;
        const auto w = a.size();
        a += gb.head(w).cwiseProduct(a) + gb.tail(w);
      }
      h.push_back(a);
    }
    for (std::size_t l = 0; l <= p.size(); ++l) ok = ok && h[l] == sim.net().activation(l);
    ok = ok && rep.n_vesicles == 0 && content.size() == 3;
  }
  return {ok && docks == 3 * kFilmSteps,
          fmt("activations equal a direct FiLM forward on every layer for %g steps (%g docks)",
              static_cast<double>(kFilmSteps), static_cast<double>(docks))};
}

VesicleTypeRegistry snn_registry(const Graph& g, std::uint64_t seed) {
  RngStream rng(seed, stream_id(Phase::Test, 104, 0));
  return VesicleTypeRegistry::build(g, {}, kSnnFeatures, RegistrySpec{}, rng);
}

// 7. Gated plasticity on full SNN runs; frozen weights without vesicles.
Outcome snn_gating() {
  std::size_t updates = 0, violations = 0, inline_violations = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (PlasticityRule rule : {PlasticityRule::ThreeFactor, PlasticityRule::Darwin3}) {
      const Graph g = random_snn_graph(24, 0.2, 10 + seed);
      SnnOptions opts;
      opts.rule = rule;
      SnnSim sim(g, snn_registry(g, seed), opts, seed);
      for (std::size_t t = 0; t < kSnnSteps; ++t) updates += sim.step().weight_updates;
      sim.finish();
      inline_violations += sim.gating_violations();
      violations += audit_gating(sim.log(), g, opts.radius, opts.dt);
    }
  }
  const Graph g = random_snn_graph(16, 0.25, 3);
  SnnOptions quiet;
  quiet.emission.frozen = MatrixXd::Zero(16, 1);
  SnnSim sim(g, snn_registry(g, 9), quiet, 4);
  std::vector<double> w0;
  for (const auto& s : sim.synapses()) w0.push_back(s.w);
  std::size_t spikes = 0;
  for (std::size_t t = 0; t < kSnnQuietSteps; ++t) spikes += sim.step().spikes;
  bool constant = true;
  for (std::size_t k = 0; k < w0.size(); ++k) constant = constant && sim.synapses()[k].w == w0[k];
  return {updates > 0 && violations == 0 && inline_violations == 0 && constant && spikes > 0,
          fmt("%g audited updates, %g violations; weights constant over %g vesicle-free steps",
              static_cast<double>(updates), static_cast<double>(violations + inline_violations),
              static_cast<double>(kSnnQuietSteps))};
}

// 8. Event-driven aging against dense unit steps at every spike time.
Outcome event_equivalence() {
  bool ok = true;
  std::size_t compared = 0;
  for (std::uint64_t train = 0; train < kSpikeTrains; ++train) {
    RngStream r(train, stream_id(Phase::Test, 105, 0));
    VesicleConfig dense;
    for (std::size_t i = 0; i < 40; ++i)
      dense.vesicles.push_back(
          nv::testing::make_vesicle(dense.allocate_id(), 0, i % 5, VectorXd::Zero(1), r.exponential(25.0)));
    VesicleConfig event = dense;
    VesicleEventScheduler sched;
    const double rate = r.uniform(0.02, 0.4);
    for (int t = 1; t <= kTrainSteps; ++t) {
      decay_step(dense, DecayOptions{1.0, 0.0}, 0, static_cast<std::uint64_t>(t));
      if (!r.bernoulli(rate)) continue;
      sched.age_to(event, t);
      ok = ok && event.size() == dense.size();
      for (std::size_t i = 0; ok && i < dense.size(); ++i)
        ok = event.vesicles[i].id == dense.vesicles[i].id && event.vesicles[i].lifetime == dense.vesicles[i].lifetime;
      ++compared;
    }
  }
  return {ok && compared > 0, fmt("%g spike times on %g trains, all lifetimes identical", static_cast<double>(compared),
                                  static_cast<double>(kSpikeTrains))};
}

VectorXd fd_head(Policy policy, const ActionRecord& a, double (Policy::*head)(const ActionRecord&) const) {
  const VectorXd p0 = policy.params();
  VectorXd g(p0.size());
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    VectorXd p = p0;
    p[i] = p0[i] + kFdEps;
    policy.set_params(p);
    const double up = (policy.*head)(a);
    p[i] = p0[i] - kFdEps;
    policy.set_params(p);
    const double down = (policy.*head)(a);
    g[i] = (up - down) / (2 * kFdEps);
  }
  return g;
}

// 9. Score-function gradients, bandit MC gradient and bandit training.
Outcome reinforce() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<int> widths{3, 4, 2};
  const auto f = nv::testing::make_fixture(widths, 4, 2);
  CoupledSim env(f.graph, f.net, f.registry, SimOptions{}, 4);
  RngStream pr(4, stream_id(Phase::Test, 106, 0));
  const Policy policy(f.graph, 2, feature_dim(f.net), kAllOperators, PolicySpec{6, 0.5}, pr);
  RlOptions ro;
  ro.horizon = 8;
  const Trajectory tr =
      rl_episode(env, policy, ro, [&](std::uint64_t t) { return make_batch(widths, 4, t); }, 17);
  double head_err = 0.0;
  std::size_t moves = 0, releases = 0;
  for (const auto& a : tr.actions) {
    moves += a.moves.size();
    releases += a.releases.size();
    const std::pair<VectorXd, double (Policy::*)(const ActionRecord&) const> heads[] = {
        {policy.emit_grad(a), &Policy::emit_log_prob},
        {policy.move_grad(a), &Policy::move_log_prob},
        {policy.dock_grad(a), &Policy::dock_log_prob},
        {policy.release_grad(a), &Policy::release_log_prob},
    };
    for (const auto& [g, head] : heads) {
      const VectorXd fd = fd_head(policy, a, head);
      if (fd.norm() == 0.0 && g.norm() == 0.0) continue;
      head_err = std::max(head_err, (g - fd).norm() / std::max(fd.norm(), 1e-12));
    }
  }

  // Arm 0 pays Bernoulli(0.8), arm 1 Bernoulli(0.2).
  const double pay[2] = {0.8, 0.2};
  CategoricalHead bandit{VectorXd(2)};
  bandit.logits << 0.4, -0.3;
  const VectorXd pi = bandit.probs();
  VectorXd analytic = VectorXd::Zero(2);
  for (std::size_t a = 0; a < 2; ++a) analytic += pi[static_cast<Eigen::Index>(a)] * pay[a] * bandit.grad_log_prob(a);
  VectorXd mc = VectorXd::Zero(2);
  for (std::size_t e = 0; e < kBanditEpisodes; ++e) {
    RngStream r(7, stream_id(Phase::Test, 107, e));
    const std::size_t a = bandit.sample(r);
    if (r.bernoulli(pay[a])) mc += bandit.grad_log_prob(a);
  }
  mc /= static_cast<double>(kBanditEpisodes);
  const double mc_err = (mc - analytic).cwiseAbs().maxCoeff();

  CategoricalHead learner{VectorXd::Zero(2)};
  ReturnBaseline baseline(0.9);
  std::size_t reached = 0;
  for (std::size_t u = 1; u <= kBanditMaxUpdates && reached == 0; ++u) {
    RngStream r(8, stream_id(Phase::Test, 108, u));
    const std::size_t a = learner.sample(r);
    const double reward = r.bernoulli(pay[a]) ? 1.0 : 0.0;
    const double b = baseline.initialized() ? baseline.value(0) : 0.0;
    learner.logits += kBanditLr * (reward - b) * learner.grad_log_prob(a);
    baseline.update({reward});
    if (learner.probs()[0] >= kBanditTarget) reached = u;
  }
  const double s = elapsed(t0);
  return {moves > 0 && releases > 0 && head_err < kHeadRelTol && mc_err < kBanditAbsTol && reached > 0 &&
              s < kRlSeconds,
          fmt("per-head FD error %.3g (tol %g), bandit MC gradient error %.3g", head_err, kHeadRelTol, mc_err) +
              fmt(" (tol %g), p(rewarded arm) >= %g after %g updates", kBanditAbsTol, kBanditTarget,
                  static_cast<double>(reached))};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[e.path().filename().string()] = ss.str();
  }
  return files;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "nvsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

// 10. Two invocations per mode into the same directory (the path is part
// of the resolved config), different thread counts, same bytes.
Outcome determinism() {
  const std::string configs = NV_CONFIG_DIR;
  const fs::path root = fs::temp_directory_path() / "nv_acceptance";
  fs::remove_all(root);
  struct Case {
    std::string name;
    std::vector<std::string> args;
    int code;
  };
  const std::vector<Case> cases{
      {"particle", {"--config", configs + "/minimal.json", "--emit-plots"}, kExitOk},
      {"density", {"--config", configs + "/density.json", "--emit-plots"}, kExitOk},
      {"consistency", {"--config", configs + "/consistency.json"}, kExitOk},
      {"snn", {"--config", configs + "/snn.json", "--emit-plots"}, kExitOk},
      {"rl", {"--config", configs + "/rl.json"}, kExitOk},
      {"film", {"--config", configs + "/film.json"}, kExitOk},
      {"diverge", {"--config", configs + "/diverge.json"}, kExitNumerical},
  };
  std::string failed;
  std::size_t files = 0;
  for (const auto& c : cases) {
    std::vector<std::map<std::string, std::string>> outs;
    for (const char* threads : {"1", "4"}) {
      setenv("NV_THREADS", threads, 1);
      const fs::path dir = root / c.name;
      fs::remove_all(dir);
      auto args = c.args;
      args.insert(args.end(), {"--out", dir.string()});
      if (invoke(args) != c.code) failed += " " + c.name + "(exit)";
      outs.push_back(snapshot(dir));
    }
    if (outs[0] != outs[1] || outs[0].empty()) failed += " " + c.name;
    files += outs[0].size();
  }
  unsetenv("NV_THREADS");
  fs::remove_all(root);
  return {failed.empty(), failed.empty() ? fmt("%g output files byte-identical across %g paired runs",
                                               static_cast<double>(files), static_cast<double>(cases.size()))
                                         : "differing:" + failed};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"no-op limits", noop_limits},
      {"gradient correctness", gradient_check},
      {"kernel statistics", kernel_statistics},
      {"mean-field agreement", mean_field},
      {"mass conservation", mass_conservation},
      {"FiLM limit", film_limit},
      {"three-factor gating", snn_gating},
      {"event-driven equivalence", event_equivalence},
      {"REINFORCE correctness", reinforce},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << o.detail << " ["
              << fmt("%.2f s", elapsed(t0)) << "]" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
