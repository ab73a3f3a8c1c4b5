#include "nv/rl.hpp"

#include <algorithm>
#include <cmath>

#include "nv/errors.hpp"
#include "nv/kernels.hpp"

namespace nv {

namespace {

constexpr std::uint64_t kMoveEntity = 1ULL << 40;
constexpr std::uint64_t kDockEntity = 2ULL << 40;
constexpr std::uint64_t kReleaseEntity = 3ULL << 40;

VectorXd softmax(const VectorXd& s) {
  const double mx = s.maxCoeff();
  VectorXd e = (s.array() - mx).exp();
  return e / e.sum();
}

double log_softmax_at(const VectorXd& s, std::size_t c) {
  const double mx = s.maxCoeff();
  return s[static_cast<Eigen::Index>(c)] - mx - std::log((s.array() - mx).exp().sum());
}

void append(VectorXd& out, Eigen::Index& pos, const MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[pos++] = m(r, c);
}

void read(const VectorXd& in, Eigen::Index& pos, MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in[pos++];
}

void append(VectorXd& out, Eigen::Index& pos, const VectorXd& v) {
  out.segment(pos, v.size()) = v;
  pos += v.size();
}

void read(const VectorXd& in, Eigen::Index& pos, VectorXd& v) {
  v = in.segment(pos, v.size());
  pos += v.size();
}

MatrixXd uniform_matrix(Eigen::Index r, Eigen::Index c, double a, RngStream& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-a, a);
  return m;
}

}  // namespace

double reward(double loss_value, const VesicleConfig& cfg, double omega_coeff) {
  return -loss_value - omega_coeff * static_cast<double>(cfg.size());
}

std::vector<OperatorMask> operator_subsets(OperatorMask enabled) {
  std::vector<OperatorMask> out;
  for (OperatorMask m = 0; m <= enabled; ++m)
    if ((m & ~enabled) == 0) out.push_back(m);
  return out;
}

double bernoulli_log_prob(double logit, bool taken) { return taken ? -softplus(-logit) : -softplus(logit); }

Policy::Policy(const Graph& g, std::size_t num_types, int feature_dim, OperatorMask enabled, const PolicySpec& spec,
               RngStream& rng)
    : graph_(g),
      num_types_(num_types),
      input_dim_(feature_dim + 2),
      hidden_(spec.hidden),
      subsets_(operator_subsets(enabled)) {
  if (spec.hidden < 1) throw ConfigError("rl.hidden: must be >= 1");
  const auto K = static_cast<Eigen::Index>(num_types);
  const auto S = static_cast<Eigen::Index>(subsets_.size());
  const double a = spec.init_scale;
  embed_w_ = uniform_matrix(hidden_, input_dim_, a, rng);
  embed_b_ = VectorXd::Zero(hidden_);
  emit_w_ = uniform_matrix(K, hidden_, a, rng);
  emit_b_ = VectorXd::Zero(K);
  move_w_ = uniform_matrix(K, hidden_, a, rng);
  dock_w_ = uniform_matrix(K, hidden_, a, rng);
  dock_b_ = VectorXd::Zero(K);
  rel_w_ = uniform_matrix(K * S, hidden_, a, rng);
  rel_b_ = VectorXd::Zero(K * S);
}

MatrixXd Policy::state(const MatrixXd& features, const VesicleConfig& cfg) const {
  const auto n = static_cast<Eigen::Index>(graph_.num_nodes());
  if (features.rows() != n || features.cols() + 2 != input_dim_) throw ShapeError("policy state: feature shape");
  MatrixXd x = MatrixXd::Zero(n, input_dim_);
  x.leftCols(features.cols()) = features;
  for (const auto& v : cfg.vesicles) x(static_cast<Eigen::Index>(v.location), features.cols()) += 1.0;
  x.col(input_dim_ - 1).setConstant(static_cast<double>(cfg.size()) / static_cast<double>(n));
  return x;
}

MatrixXd Policy::embed(const MatrixXd& state) const {
  MatrixXd pre = state * embed_w_.transpose();
  pre.rowwise() += embed_b_.transpose();
  return pre.array().tanh();
}

double Policy::emit_logit(const MatrixXd& z, NodeId u, TypeId k) const {
  const auto kk = static_cast<Eigen::Index>(k);
  return emit_w_.row(kk).dot(z.row(static_cast<Eigen::Index>(u))) + emit_b_[kk];
}

VectorXd Policy::move_scores(const MatrixXd& z, TypeId k, NodeId from) const {
  const auto support = graph_.migration_support(from);
  VectorXd s(static_cast<Eigen::Index>(support.size()));
  for (std::size_t j = 0; j < support.size(); ++j)
    s[static_cast<Eigen::Index>(j)] =
        move_w_.row(static_cast<Eigen::Index>(k)).dot(z.row(static_cast<Eigen::Index>(support[j])));
  return s;
}

VectorXd Policy::move_probs(const MatrixXd& z, TypeId k, NodeId from) const {
  return softmax(move_scores(z, k, from));
}

double Policy::move_log_prob_at(const MatrixXd& z, TypeId k, NodeId from, std::size_t c) const {
  return log_softmax_at(move_scores(z, k, from), c);
}

double Policy::dock_logit(const MatrixXd& z, NodeId u, TypeId k) const {
  const auto kk = static_cast<Eigen::Index>(k);
  return dock_w_.row(kk).dot(z.row(static_cast<Eigen::Index>(u))) + dock_b_[kk];
}

VectorXd Policy::release_logits(const MatrixXd& z, NodeId u, TypeId k) const {
  const auto S = static_cast<Eigen::Index>(subsets_.size());
  const auto base = static_cast<Eigen::Index>(k) * S;
  return rel_w_.middleRows(base, S) * z.row(static_cast<Eigen::Index>(u)).transpose() + rel_b_.segment(base, S);
}

VectorXd Policy::release_probs(const MatrixXd& z, NodeId u, TypeId k) const {
  return softmax(release_logits(z, u, k));
}

double Policy::release_log_prob_at(const MatrixXd& z, NodeId u, TypeId k, std::size_t c) const {
  return log_softmax_at(release_logits(z, u, k), c);
}

std::size_t Policy::move_choice(NodeId from, NodeId to) const {
  const auto support = graph_.migration_support(from);
  const auto it = std::find(support.begin(), support.end(), to);
  if (it == support.end()) throw std::invalid_argument("policy: recorded move leaves the migration support");
  return static_cast<std::size_t>(it - support.begin());
}

double Policy::log_prob_heads(const ActionRecord& a, unsigned heads) const {
  // Steps without a vesicle phase carry no decisions.
  if (a.state.size() == 0) return 0.0;
  const MatrixXd z = embed(a.state);
  const auto n = graph_.num_nodes();
  double lp = 0.0;
  if (heads & kEmit) {
    for (NodeId u = 0; u < n; ++u)
      for (TypeId k = 0; k < num_types_; ++k)
        lp += bernoulli_log_prob(emit_logit(z, u, k), a.emit[u * num_types_ + k] != 0);
  }
  if (heads & kMove) {
    for (const auto& m : a.moves) lp += move_log_prob_at(z, m.type, m.from, move_choice(m.from, m.to));
  }
  if (heads & kDock) {
    for (const auto& d : a.docks) lp += bernoulli_log_prob(dock_logit(z, d.at, d.type), d.docked);
  }
  if (heads & kRelease) {
    for (const auto& r : a.releases) lp += release_log_prob_at(z, r.at, r.type, r.subset);
  }
  return lp;
}

VectorXd Policy::grad_heads(const ActionRecord& a, unsigned heads) const {
  if (a.state.size() == 0) return VectorXd::Zero(static_cast<Eigen::Index>(num_params()));
  const MatrixXd z = embed(a.state);
  const auto n = graph_.num_nodes();
  MatrixXd dz = MatrixXd::Zero(z.rows(), z.cols());
  MatrixXd g_emit_w = MatrixXd::Zero(emit_w_.rows(), emit_w_.cols());
  VectorXd g_emit_b = VectorXd::Zero(emit_b_.size());
  MatrixXd g_move_w = MatrixXd::Zero(move_w_.rows(), move_w_.cols());
  MatrixXd g_dock_w = MatrixXd::Zero(dock_w_.rows(), dock_w_.cols());
  VectorXd g_dock_b = VectorXd::Zero(dock_b_.size());
  MatrixXd g_rel_w = MatrixXd::Zero(rel_w_.rows(), rel_w_.cols());
  VectorXd g_rel_b = VectorXd::Zero(rel_b_.size());

  if (heads & kEmit) {
    for (NodeId u = 0; u < n; ++u) {
      const auto uu = static_cast<Eigen::Index>(u);
      for (TypeId k = 0; k < num_types_; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double d = (a.emit[u * num_types_ + k] ? 1.0 : 0.0) - sigmoid(emit_logit(z, u, k));
        g_emit_w.row(kk) += d * z.row(uu);
        g_emit_b[kk] += d;
        dz.row(uu) += d * emit_w_.row(kk);
      }
    }
  }
  if (heads & kMove) {
    for (const auto& m : a.moves) {
      const auto kk = static_cast<Eigen::Index>(m.type);
      const auto support = graph_.migration_support(m.from);
      const VectorXd p = move_probs(z, m.type, m.from);
      const std::size_t c = move_choice(m.from, m.to);
      for (std::size_t j = 0; j < support.size(); ++j) {
        const double d = (j == c ? 1.0 : 0.0) - p[static_cast<Eigen::Index>(j)];
        const auto jj = static_cast<Eigen::Index>(support[j]);
        g_move_w.row(kk) += d * z.row(jj);
        dz.row(jj) += d * move_w_.row(kk);
      }
    }
  }
  if (heads & kDock) {
    for (const auto& dk : a.docks) {
      const auto kk = static_cast<Eigen::Index>(dk.type);
      const auto uu = static_cast<Eigen::Index>(dk.at);
      const double d = (dk.docked ? 1.0 : 0.0) - sigmoid(dock_logit(z, dk.at, dk.type));
      g_dock_w.row(kk) += d * z.row(uu);
      g_dock_b[kk] += d;
      dz.row(uu) += d * dock_w_.row(kk);
    }
  }
  if (heads & kRelease) {
    const auto S = static_cast<Eigen::Index>(subsets_.size());
    for (const auto& r : a.releases) {
      const auto base = static_cast<Eigen::Index>(r.type) * S;
      const auto uu = static_cast<Eigen::Index>(r.at);
      VectorXd d = -release_probs(z, r.at, r.type);
      d[static_cast<Eigen::Index>(r.subset)] += 1.0;
      g_rel_w.middleRows(base, S) += d * z.row(uu);
      g_rel_b.segment(base, S) += d;
      dz.row(uu) += d.transpose() * rel_w_.middleRows(base, S);
    }
  }

  MatrixXd g_embed_w = MatrixXd::Zero(embed_w_.rows(), embed_w_.cols());
  VectorXd g_embed_b = VectorXd::Zero(embed_b_.size());
  for (Eigen::Index u = 0; u < z.rows(); ++u) {
    const VectorXd da = (dz.row(u).array() * (1.0 - z.row(u).array().square())).transpose();
    g_embed_w += da * a.state.row(u);
    g_embed_b += da;
  }

  VectorXd out(static_cast<Eigen::Index>(num_params()));
  Eigen::Index pos = 0;
  append(out, pos, g_embed_w);
  append(out, pos, g_embed_b);
  append(out, pos, g_emit_w);
  append(out, pos, g_emit_b);
  append(out, pos, g_move_w);
  append(out, pos, g_dock_w);
  append(out, pos, g_dock_b);
  append(out, pos, g_rel_w);
  append(out, pos, g_rel_b);
  return out;
}

double Policy::log_prob(const ActionRecord& a) const { return log_prob_heads(a, kAllHeads); }
VectorXd Policy::grad_log_prob(const ActionRecord& a) const { return grad_heads(a, kAllHeads); }
double Policy::emit_log_prob(const ActionRecord& a) const { return log_prob_heads(a, kEmit); }
double Policy::move_log_prob(const ActionRecord& a) const { return log_prob_heads(a, kMove); }
double Policy::dock_log_prob(const ActionRecord& a) const { return log_prob_heads(a, kDock); }
double Policy::release_log_prob(const ActionRecord& a) const { return log_prob_heads(a, kRelease); }
VectorXd Policy::emit_grad(const ActionRecord& a) const { return grad_heads(a, kEmit); }
VectorXd Policy::move_grad(const ActionRecord& a) const { return grad_heads(a, kMove); }
VectorXd Policy::dock_grad(const ActionRecord& a) const { return grad_heads(a, kDock); }
VectorXd Policy::release_grad(const ActionRecord& a) const { return grad_heads(a, kRelease); }

std::size_t Policy::num_params() const {
  return static_cast<std::size_t>(embed_w_.size() + embed_b_.size() + emit_w_.size() + emit_b_.size() +
                                  move_w_.size() + dock_w_.size() + dock_b_.size() + rel_w_.size() + rel_b_.size());
}

VectorXd Policy::params() const {
  VectorXd out(static_cast<Eigen::Index>(num_params()));
  Eigen::Index pos = 0;
  append(out, pos, embed_w_);
  append(out, pos, embed_b_);
  append(out, pos, emit_w_);
  append(out, pos, emit_b_);
  append(out, pos, move_w_);
  append(out, pos, dock_w_);
  append(out, pos, dock_b_);
  append(out, pos, rel_w_);
  append(out, pos, rel_b_);
  return out;
}

void Policy::set_params(const VectorXd& p) {
  if (p.size() != static_cast<Eigen::Index>(num_params())) throw ShapeError("policy: parameter vector size");
  Eigen::Index pos = 0;
  read(p, pos, embed_w_);
  read(p, pos, embed_b_);
  read(p, pos, emit_w_);
  read(p, pos, emit_b_);
  read(p, pos, move_w_);
  read(p, pos, dock_w_);
  read(p, pos, dock_b_);
  read(p, pos, rel_w_);
  read(p, pos, rel_b_);
}

std::vector<EmissionEvent> PolicyController::emissions(const StepContext& ctx) {
  record_ = ActionRecord{};
  record_.state = policy_.state(ctx.features, ctx.vesicles);
  embedded_ = policy_.embed(record_.state);
  const std::size_t K = policy_.num_types();
  const std::size_t n = ctx.graph.num_nodes();
  record_.emit.assign(n * K, 0);
  std::vector<EmissionEvent> out;
  for (NodeId u = 0; u < n; ++u) {
    for (TypeId k = 0; k < K; ++k) {
      const std::size_t idx = u * K + k;
      const double logit = policy_.emit_logit(embedded_, u, k);
      const double p = sigmoid(logit);
      RngStream rng(ctx.seed, stream_id(Phase::Policy, ctx.step, idx));
      const bool emit = rng.bernoulli(p);
      record_.emit[idx] = emit ? 1 : 0;
      record_.log_prob += bernoulli_log_prob(logit, emit);
      out.push_back({u, k, emit ? 1u : 0u, p});
    }
  }
  return out;
}

std::vector<NodeId> PolicyController::moves(const StepContext& ctx, std::span<const Vesicle> vesicles) {
  std::vector<NodeId> out;
  out.reserve(vesicles.size());
  for (const auto& v : vesicles) {
    const auto support = ctx.graph.migration_support(v.location);
    const VectorXd p = policy_.move_probs(embedded_, v.type, v.location);
    RngStream rng(ctx.seed, stream_id(Phase::Policy, ctx.step, kMoveEntity + v.id));
    const std::size_t c = rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
    out.push_back(support[c]);
    record_.moves.push_back({v.type, v.location, support[c]});
    record_.log_prob += policy_.move_log_prob_at(embedded_, v.type, v.location, c);
  }
  return out;
}

std::vector<char> PolicyController::docks(const StepContext& ctx, std::span<const Vesicle> vesicles) {
  std::vector<char> out;
  out.reserve(vesicles.size());
  for (const auto& v : vesicles) {
    const double logit = policy_.dock_logit(embedded_, v.location, v.type);
    RngStream rng(ctx.seed, stream_id(Phase::Policy, ctx.step, kDockEntity + v.id));
    const bool dock = rng.bernoulli(sigmoid(logit));
    out.push_back(dock ? 1 : 0);
    record_.docks.push_back({v.type, v.location, dock});
    record_.log_prob += bernoulli_log_prob(logit, dock);
  }
  return out;
}

OperatorMask PolicyController::release_ops(const StepContext& ctx, const Vesicle& v) {
  const VectorXd p = policy_.release_probs(embedded_, v.location, v.type);
  RngStream rng(ctx.seed, stream_id(Phase::Policy, ctx.step, kReleaseEntity + v.id));
  const std::size_t c = rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
  record_.releases.push_back({v.type, v.location, c});
  record_.log_prob += policy_.release_log_prob_at(embedded_, v.location, v.type, c);
  return policy_.subsets()[c];
}

ActionRecord PolicyController::take_record() {
  ActionRecord out = std::move(record_);
  record_ = ActionRecord{};
  return out;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> R(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    R[i] = acc;
  }
  return R;
}

void ReturnBaseline::update(const std::vector<double>& returns) {
  if (!initialized_) {
    values_ = returns;
    initialized_ = true;
    return;
  }
  for (std::size_t t = 0; t < returns.size(); ++t) {
    if (t < values_.size())
      values_[t] = decay_ * values_[t] + (1.0 - decay_) * returns[t];
    else
      values_.push_back(returns[t]);
  }
}

Trajectory rl_episode(const CoupledSim& env, const Policy& policy, const RlOptions& opts,
                      const std::function<Batch(std::uint64_t)>& data, std::uint64_t episode_seed,
                      EventLog* log) {
  if (!env.options().scripted_emission.empty())
    throw ConfigError("kernels.scripted_emission: not available in rl mode, the policy decides emissions");
  CoupledSim sim(env.graph(), env.net(), env.registry(), env.options(), episode_seed);
  PolicyController controller(policy);
  Trajectory traj;
  for (std::size_t t = 0; t < opts.horizon; ++t) {
    const StepReport rep = sim.step(data(sim.current_step()), controller);
    traj.actions.push_back(controller.take_record());
    const double r = reward(rep.loss_post, sim.vesicles(), opts.omega_coeff);
    traj.rewards.push_back(r);
    traj.total_reward += r;
  }
  traj.returns = discounted_returns(traj.rewards, opts.gamma);
  if (log)
    for (const auto& r : sim.log().records()) log->append(r);
  return traj;
}

double reinforce_update(Policy& policy, const std::vector<Trajectory>& batch, ReturnBaseline& baseline,
                        double learning_rate) {
  const bool warm = baseline.initialized();
  if (!warm && !batch.empty()) baseline.update(batch.front().returns);
  VectorXd step = VectorXd::Zero(static_cast<Eigen::Index>(policy.num_params()));
  for (const auto& traj : batch)
    for (std::size_t t = 0; t < traj.actions.size(); ++t) {
      const double adv = traj.returns[t] - baseline.value(t);
      if (adv != 0.0) step += adv * policy.grad_log_prob(traj.actions[t]);
    }
  step *= learning_rate;
  policy.set_params(policy.params() + step);
  for (std::size_t i = warm ? 0 : 1; i < batch.size(); ++i) baseline.update(batch[i].returns);
  return step.norm();
}

VectorXd CategoricalHead::probs() const { return softmax(logits); }

std::size_t CategoricalHead::sample(RngStream& rng) const {
  const VectorXd p = probs();
  return rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

double CategoricalHead::log_prob(std::size_t a) const { return log_softmax_at(logits, a); }

VectorXd CategoricalHead::grad_log_prob(std::size_t a) const {
  VectorXd g = -probs();
  g[static_cast<Eigen::Index>(a)] += 1.0;
  return g;
}

}  // namespace nv
