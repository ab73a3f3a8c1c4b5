#include "nv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nv/errors.hpp"

namespace nv {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

double emission_logit(const VesicleTypeRegistry& reg, TypeId type, const VectorXd& features) {
  const VectorXd psi = reg.emit_encoder().apply(features).array().tanh();
  return reg.type(type).emit_vec.dot(psi);
}

double emission_intensity(const VesicleTypeRegistry& reg, TypeId type, const VectorXd& features) {
  return clamp_prob(sigmoid(emission_logit(reg, type, features)));
}

MatrixXd emission_table(const VesicleTypeRegistry& reg, const MatrixXd& features,
                        const std::optional<MatrixXd>& frozen) {
  const auto n = features.rows();
  const auto K = static_cast<Eigen::Index>(reg.num_types());
  if (frozen) {
    if (frozen->rows() != n || frozen->cols() != K) throw ShapeError("frozen emission table shape mismatch");
    return *frozen;
  }
  MatrixXd table(n, K);
  for (Eigen::Index u = 0; u < n; ++u) {
    const VectorXd f = features.row(u).transpose();
    for (Eigen::Index k = 0; k < K; ++k) table(u, k) = emission_intensity(reg, k, f);
  }
  return table;
}

std::vector<EmissionEvent> sample_emissions(const VesicleTypeRegistry& reg, const MatrixXd& features,
                                            const EmissionOptions& opts, std::uint64_t seed,
                                            std::uint64_t step, Exec exec) {
  const MatrixXd lambda = emission_table(reg, features, opts.frozen);
  const auto n = static_cast<std::int64_t>(lambda.rows());
  const auto K = static_cast<std::int64_t>(lambda.cols());
  std::vector<EmissionEvent> events(static_cast<std::size_t>(n * K));
  // Checked up front: a throw inside the parallel loop would terminate.
  if (!(lambda.array() >= 0.0).all() || !(lambda.array() <= 700.0).all())
    throw NumericalError("emission: intensity outside [0, 700] at step " + std::to_string(step), "");
  const auto clamp = static_cast<std::uint32_t>(std::max(0, opts.max_emit_per_node));
  auto one = [&](std::int64_t idx) {
    const std::int64_t u = idx / K;
    const std::int64_t k = idx % K;
    RngStream rng(seed, stream_id(Phase::Emit, step, static_cast<std::uint64_t>(idx)));
    const double lam = lambda(u, k);
    events[idx] = {static_cast<NodeId>(u), static_cast<TypeId>(k), std::min(rng.poisson(lam), clamp), lam};
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n * K; ++i) one(i);
  } else {
    for (std::int64_t i = 0; i < n * K; ++i) one(i);
  }
  return events;
}

VectorXd migration_distribution(const VesicleTypeRegistry& reg, const Vesicle& v, const MatrixXd& features) {
  const TypeParams& tp = reg.type(v.type);
  const auto n = tp.transition.cols();
  VectorXd logits = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double t = tp.transition(v.location, j);
    if (t <= 0.0) continue;
    logits[j] = std::log(t) + tp.temperature * features(j, 2);
    mx = std::max(mx, logits[j]);
  }
  VectorXd p = VectorXd::Zero(n);
  if (!std::isfinite(mx)) {
    p[v.location] = 1.0;
    return p;
  }
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isinf(logits[j])) continue;
    p[j] = std::exp(logits[j] - mx);
    sum += p[j];
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    p.setZero();
    p[v.location] = 1.0;
    return p;
  }
  return p / sum;
}

NodeId sample_move(const VectorXd& dist, RngStream& rng) {
  return rng.categorical(std::span<const double>(dist.data(), static_cast<std::size_t>(dist.size())));
}

double docking_logit(const VesicleTypeRegistry& reg, const Vesicle& v, const VectorXd& node_features) {
  VectorXd in(node_features.size() + v.content.size() + 1);
  in << node_features, v.content, v.internal.budget;
  const VectorXd psi = reg.dock_encoder().apply(in).array().tanh();
  return reg.type(v.type).dock_vec.dot(psi);
}

double docking_probability(const VesicleTypeRegistry& reg, const Vesicle& v, const VectorXd& node_features) {
  return clamp_prob(sigmoid(docking_logit(reg, v, node_features)));
}

std::vector<NodeId> sample_moves(const VesicleTypeRegistry& reg, std::span<const Vesicle> vesicles,
                                 const MatrixXd& features, std::uint64_t seed, std::uint64_t step, Exec exec) {
  std::vector<NodeId> out(vesicles.size());
  const auto n = static_cast<std::int64_t>(vesicles.size());
  auto one = [&](std::int64_t i) {
    const Vesicle& v = vesicles[i];
    RngStream rng(seed, stream_id(Phase::Move, step, v.id));
    out[i] = sample_move(migration_distribution(reg, v, features), rng);
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) one(i);
  }
  return out;
}

std::vector<char> sample_docks(const VesicleTypeRegistry& reg, std::span<const Vesicle> vesicles,
                               const MatrixXd& features, std::uint64_t seed, std::uint64_t step, Exec exec) {
  std::vector<char> out(vesicles.size(), 0);
  const auto n = static_cast<std::int64_t>(vesicles.size());
  auto one = [&](std::int64_t i) {
    const Vesicle& v = vesicles[i];
    if (reg.type(v.type).force_dock) {
      out[i] = 1;
      return;
    }
    RngStream rng(seed, stream_id(Phase::Dock, step, v.id));
    const VectorXd f = features.row(v.location).transpose();
    out[i] = rng.bernoulli(docking_probability(reg, v, f)) ? 1 : 0;
  };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) one(i);
  }
  return out;
}

std::vector<RemovedVesicle> decay_step(VesicleConfig& cfg, const DecayOptions& opts, std::uint64_t seed,
                                       std::uint64_t step, std::span<const VesicleId> absorbed) {
  if (!(opts.dt > 0.0)) throw std::invalid_argument("decay_step: dt must be positive");
  std::vector<RemovedVesicle> removed;
  std::vector<Vesicle> kept;
  kept.reserve(cfg.vesicles.size());
  for (auto& v : cfg.vesicles) {
    double noise = 0.0;
    if (opts.noise_std > 0.0) {
      RngStream rng(seed, stream_id(Phase::Decay, step, v.id));
      noise = opts.noise_std * rng.normal();
    }
    v.lifetime = v.lifetime - opts.dt + noise;
    const bool absorb = std::binary_search(absorbed.begin(), absorbed.end(), v.id);
    if (v.lifetime <= 0.0 || absorb) {
      removed.push_back({v.id, v.location, v.lifetime, absorb});
    } else {
      kept.push_back(std::move(v));
    }
  }
  cfg.vesicles = std::move(kept);
  return removed;
}

}  // namespace nv
