#include "nv/vesicle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "nv/errors.hpp"

namespace nv {

const Vesicle* VesicleConfig::find(VesicleId id) const {
  auto it = std::lower_bound(vesicles.begin(), vesicles.end(), id,
                             [](const Vesicle& v, VesicleId x) { return v.id < x; });
  return (it != vesicles.end() && it->id == id) ? &*it : nullptr;
}

AffineMap AffineMap::zeros(Eigen::Index out, Eigen::Index in) {
  return {MatrixXd::Zero(out, in), VectorXd::Zero(out)};
}

AffineMap AffineMap::uniform(Eigen::Index out, Eigen::Index in, double scale, RngStream& rng) {
  AffineMap m = zeros(out, in);
  if (scale == 0.0) return m;
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) m.weight(r, c) = rng.uniform(-scale, scale);
  for (Eigen::Index r = 0; r < out; ++r) m.bias[r] = rng.uniform(-scale, scale);
  return m;
}

VectorXd AffineMap::apply(const VectorXd& x) const {
  if (x.size() != weight.cols()) throw ShapeError("AffineMap::apply: input width mismatch");
  return weight * x + bias;
}

namespace {

VectorXd uniform_vec(Eigen::Index n, double scale, RngStream& rng) {
  VectorXd v = VectorXd::Zero(n);
  if (scale == 0.0) return v;
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

MatrixXd uniform_mat(Eigen::Index r, Eigen::Index c, double scale, RngStream& rng) {
  MatrixXd m = MatrixXd::Zero(r, c);
  if (scale == 0.0) return m;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

}  // namespace

VesicleTypeRegistry VesicleTypeRegistry::build(const Graph& g, const std::vector<int>& widths,
                                               int feature_dim, const RegistrySpec& spec, RngStream& rng) {
  if (spec.types.empty()) throw ConfigError("vesicles.num_types: need at least one type");
  if (spec.content_dim <= 0) throw ConfigError("vesicles.d_c: must be positive");
  VesicleTypeRegistry reg;
  reg.content_dim_ = spec.content_dim;
  reg.feature_dim_ = feature_dim;
  reg.mask_ = g.migration_mask();
  const int dc = spec.content_dim;
  reg.emit_encoder_ = AffineMap::uniform(spec.emit_dim, feature_dim, spec.init_scale, rng);
  reg.dock_encoder_ = AffineMap::uniform(spec.dock_dim, feature_dim + dc + 1, spec.init_scale, rng);

  const double rs = spec.release_init_scale;
  for (std::size_t k = 0; k < spec.types.size(); ++k) {
    const TypeSpec& ts = spec.types[k];
    TypeParams tp;
    tp.emit_vec = uniform_vec(spec.emit_dim, ts.emit_scale, rng);
    tp.content_mean = AffineMap::uniform(dc, feature_dim, spec.init_scale, rng);
    tp.content_log_std = AffineMap::zeros(dc, feature_dim);
    tp.content_log_std.bias.setConstant(std::log(ts.content_std));
    tp.lifetime_mean = ts.lifetime_mean;
    tp.lifetime_dist = ts.lifetime_dist;
    tp.temperature = ts.temperature;
    tp.dock_vec = uniform_vec(spec.dock_dim, ts.dock_scale, rng);
    tp.force_dock = ts.force_dock;
    tp.decay_rate = ts.decay_rate;
    tp.mod_vec = uniform_vec(dc, ts.mod_scale, rng);
    if (!widths.empty()) {
      for (std::size_t l = 0; l < widths.size(); ++l)
        tp.act_release.push_back(AffineMap::uniform(2 * widths[l], dc, rs, rng));
      for (std::size_t l = 1; l < widths.size(); ++l) {
        tp.param_release.push_back({uniform_mat(widths[l], dc, rs, rng),
                                    uniform_mat(widths[l - 1], dc, rs, rng), spec.param_step});
        const Eigen::Index P = static_cast<Eigen::Index>(widths[l]) * (widths[l - 1] + 1);
        tp.rule_release.push_back({AffineMap::uniform(P, dc, rs, rng), AffineMap::uniform(P, dc, rs, rng),
                                   AffineMap::uniform(1, dc, rs, rng)});
      }
      tp.memory_proj = uniform_mat(spec.memory_dim, dc, rs, rng);
    }
    reg.types_.push_back(std::move(tp));
    if (ts.transition) {
      reg.set_transition(k, *ts.transition);
    } else {
      reg.set_transition_scores(k, MatrixXd::Zero(g.num_nodes(), g.num_nodes()));
    }
  }
  if (!widths.empty()) {
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      const int layer = g.layer_of(u);
      if (static_cast<std::size_t>(layer) >= widths.size())
        throw ConfigError("graph.layer_of[" + std::to_string(u) + "]: layer " + std::to_string(layer) +
                          " exceeds the network depth");
      reg.memory_read_.push_back(uniform_mat(widths[layer], spec.memory_dim, rs, rng));
    }
  }
  return reg;
}

void VesicleTypeRegistry::set_transition_scores(TypeId k, const MatrixXd& scores) {
  const Eigen::Index n = mask_.rows();
  if (scores.rows() != n || scores.cols() != n) throw ShapeError("set_transition_scores: shape mismatch");
  auto& tp = types_.at(k);
  tp.transition = MatrixXd::Zero(n, n);
  tp.transition_scores = MatrixXd::Constant(n, n, -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask_(i, j)) mx = std::max(mx, scores(i, j));
    if (!std::isfinite(mx))
      throw ConfigError("transition: row " + std::to_string(i) + " has no finite score on its support");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!mask_(i, j)) continue;
      tp.transition(i, j) = std::exp(scores(i, j) - mx);
      sum += tp.transition(i, j);
    }
    tp.transition.row(i) /= sum;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask_(i, j)) tp.transition_scores(i, j) = scores(i, j);
  }
}

void VesicleTypeRegistry::set_transition(TypeId k, const MatrixXd& t) {
  const Eigen::Index n = mask_.rows();
  const std::string key = "vesicles.types[" + std::to_string(k) + "].transition";
  if (t.rows() != n || t.cols() != n) throw ConfigError(key + ": expected a " + std::to_string(n) + "x" +
                                                        std::to_string(n) + " matrix");
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(t(i, j) >= 0.0)) throw ConfigError(key + ": entries must be non-negative");
      if (!mask_(i, j) && t(i, j) != 0.0)
        throw ConfigError(key + ": nonzero entry (" + std::to_string(i) + "," + std::to_string(j) +
                          ") outside the graph's migration support");
      sum += t(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError(key + ": row " + std::to_string(i) + " does not sum to 1");
  }
  MatrixXd scores(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      scores(i, j) = t(i, j) > 0.0 ? std::log(t(i, j)) : -std::numeric_limits<double>::infinity();
  set_transition_scores(k, scores);
}

double VesicleTypeRegistry::transition_defect() const {
  double worst = 0.0;
  for (const auto& tp : types_) {
    for (Eigen::Index i = 0; i < tp.transition.rows(); ++i) {
      worst = std::max(worst, std::abs(tp.transition.row(i).sum() - 1.0));
      for (Eigen::Index j = 0; j < tp.transition.cols(); ++j)
        if (!mask_(i, j)) worst = std::max(worst, std::abs(tp.transition(i, j)));
    }
  }
  return worst;
}

Vesicle spawn(const VesicleTypeRegistry& reg, TypeId type, NodeId location, const VectorXd& features,
              RngStream& rng) {
  const TypeParams& tp = reg.type(type);
  Vesicle v;
  v.type = type;
  v.location = location;
  const VectorXd mean = tp.content_mean.apply(features);
  const VectorXd log_std = tp.content_log_std.apply(features);
  v.content.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double sd = std::max(std::exp(log_std[i]), 1e-8);
    v.content[i] = mean[i] + sd * rng.normal();
  }
  if (tp.lifetime_dist == LifetimeDist::Fixed) {
    v.lifetime = tp.lifetime_mean;
  } else {
    do {
      v.lifetime = rng.exponential(tp.lifetime_mean);
    } while (v.lifetime < kMinLifetime);
  }
  v.internal = InternalState{1.0, 0};
  return v;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

template <typename T>
std::uint64_t hash_pod(const T& value, std::uint64_t h) {
  return fnv1a(&value, sizeof(T), h);
}

template <typename Derived>
std::uint64_t hash_dense(const Eigen::DenseBase<Derived>& m, std::uint64_t h) {
  const auto rows = static_cast<std::int64_t>(m.rows());
  const auto cols = static_cast<std::int64_t>(m.cols());
  h = hash_pod(rows, h);
  h = hash_pod(cols, h);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) h = hash_pod(static_cast<double>(m(i, j)), h);
  return h;
}

}  // namespace

std::uint64_t joint_state_digest(const NetworkState& net, const VesicleConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : net.params()) {
    h = hash_dense(p.weight, h);
    h = hash_dense(p.bias, h);
  }
  for (const auto& a : net.activations()) h = hash_dense(a, h);
  h = hash_pod(static_cast<std::uint64_t>(cfg.vesicles.size()), h);
  for (const auto& v : cfg.vesicles) {
    h = hash_pod(v.id, h);
    h = hash_dense(v.content, h);
    h = hash_pod(static_cast<std::uint64_t>(v.type), h);
    h = hash_pod(static_cast<std::uint64_t>(v.location), h);
    h = hash_pod(v.lifetime, h);
    h = hash_pod(v.internal.budget, h);
    h = hash_pod(static_cast<std::int64_t>(v.internal.mode), h);
  }
  for (const auto& m : net.memories()) {
    h = hash_dense(m.slot, h);
    h = hash_pod(static_cast<std::int64_t>(m.write_count), h);
  }
  return h;
}

std::string hex_digest(std::uint64_t d) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

}  // namespace nv
