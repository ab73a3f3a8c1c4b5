#include "nv/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "nv/errors.hpp"
#include "nv/release.hpp"

namespace nv {

DensityField DensityField::zeros(std::size_t num_nodes, std::size_t num_types, int content_dim) {
  DensityField f;
  f.rho = MatrixXd::Zero(static_cast<Eigen::Index>(num_nodes), static_cast<Eigen::Index>(num_types));
  f.mean_content.assign(num_types, MatrixXd::Zero(static_cast<Eigen::Index>(num_nodes), content_dim));
  return f;
}

DensityDynamics DensityDynamics::from_registry(const VesicleTypeRegistry& reg, const MatrixXd& lambda) {
  DensityDynamics d;
  d.decay.resize(static_cast<Eigen::Index>(reg.num_types()));
  for (TypeId k = 0; k < reg.num_types(); ++k) {
    d.transition.push_back(reg.type(k).transition);
    d.decay[static_cast<Eigen::Index>(k)] = reg.type(k).decay_rate;
  }
  d.lambda = lambda;
  return d;
}

namespace {

std::size_t step_type(DensityField& field, const DensityDynamics& dyn, Eigen::Index k) {
  const MatrixXd& T = dyn.transition[k];
  const double delta = dyn.decay[k];
  const VectorXd rho = field.rho.col(k);
  MatrixXd& C = field.mean_content[k];

  VectorXd next = T.transpose() * rho - delta * rho + dyn.lambda.col(k);
  // Mass-weighted content: sum of contents moves with the mass.
  MatrixXd sum_c = T.transpose() * (C.array().colwise() * rho.array()).matrix();
  sum_c -= delta * (C.array().colwise() * rho.array()).matrix();
  if (!dyn.emit_content.empty())
    sum_c += (dyn.emit_content[k].array().colwise() * dyn.lambda.col(k).array()).matrix();

  std::size_t clamped = 0;
  for (Eigen::Index u = 0; u < next.size(); ++u) {
    if (next[u] < 0.0) {
      next[u] = 0.0;
      ++clamped;
    }
    if (next[u] < kEmptyMass)
      C.row(u).setZero();
    else
      C.row(u) = sum_c.row(u) / next[u];
  }
  field.rho.col(k) = next;
  return clamped;
}

}  // namespace

std::size_t density_step(DensityField& field, const DensityDynamics& dyn, Exec exec) {
  const auto K = static_cast<Eigen::Index>(field.num_types());
  const auto n = static_cast<Eigen::Index>(field.num_nodes());
  if (static_cast<Eigen::Index>(dyn.transition.size()) != K || dyn.decay.size() != K || dyn.lambda.rows() != n ||
      dyn.lambda.cols() != K || (!dyn.emit_content.empty() && static_cast<Eigen::Index>(dyn.emit_content.size()) != K))
    throw ShapeError("density_step: dynamics do not match the field");
  std::vector<std::size_t> clamped(static_cast<std::size_t>(K), 0);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index k = 0; k < K; ++k) clamped[k] = step_type(field, dyn, k);
  } else {
    for (Eigen::Index k = 0; k < K; ++k) clamped[k] = step_type(field, dyn, k);
  }
  std::size_t total = 0;
  for (auto c : clamped) total += c;
  return total;
}

VectorXd expected_release(const DensityField& field, const VesicleTypeRegistry& reg, NodeId node,
                          std::size_t layer, const VectorXd& h, const std::optional<VectorXd>& dock_prob) {
  VectorXd total = VectorXd::Zero(h.size());
  for (TypeId k = 0; k < field.num_types(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    double mass = field.rho(static_cast<Eigen::Index>(node), kk);
    if (dock_prob) mass *= (*dock_prob)[kk];
    if (mass == 0.0) continue;
    const FilmParams fp = film_params(reg, k, field.mean_content[k].row(static_cast<Eigen::Index>(node)).transpose(), layer);
    if (fp.gamma.size() != h.size()) throw ShapeError("expected_release: release map width != node width");
    total += mass * (fp.gamma.cwiseProduct(h) + fp.beta);
  }
  return total;
}

namespace {

ConsistencyScenario chain_scenario(bool lazy, double lambda0, double decay, std::size_t horizon, std::size_t runs) {
  ConsistencyScenario sc;
  MatrixXd T = MatrixXd::Zero(3, 3);
  if (lazy) {
    T << 0.5, 0.5, 0.0,
         0.0, 0.5, 0.5,
         0.0, 0.0, 1.0;
  } else {
    T << 0.0, 1.0, 0.0,
         0.0, 0.0, 1.0,
         0.0, 0.0, 1.0;
  }
  sc.transition = {T};
  sc.decay = VectorXd::Constant(1, decay);
  sc.lambda = MatrixXd::Zero(3, 1);
  sc.lambda(0, 0) = lambda0;
  sc.initial = MatrixXd::Zero(3, 1);
  sc.horizon = horizon;
  sc.runs = runs;
  return sc;
}

}  // namespace

ConsistencyScenario ConsistencyScenario::lazy_chain(double lambda0, double decay, std::size_t horizon,
                                                    std::size_t runs) {
  return chain_scenario(true, lambda0, decay, horizon, runs);
}

ConsistencyScenario ConsistencyScenario::strict_chain(double lambda0, double decay, std::size_t horizon,
                                                      std::size_t runs) {
  return chain_scenario(false, lambda0, decay, horizon, runs);
}

bool realizable(const MatrixXd& transition, double decay) {
  if (decay <= 0.0) return true;
  for (Eigen::Index i = 0; i < transition.rows(); ++i)
    if (transition(i, i) < decay) return false;
  return true;
}

MatrixXd compensated_kernel(const MatrixXd& transition, double decay) {
  if (decay <= 0.0) return transition;
  if (decay >= 1.0) return MatrixXd::Identity(transition.rows(), transition.cols());
  MatrixXd t = transition;
  t.diagonal().array() -= decay;
  return t / (1.0 - decay);
}

ConsistencyReport consistency_check(const ConsistencyScenario& sc, std::uint64_t seed, Exec exec) {
  const auto K = static_cast<Eigen::Index>(sc.transition.size());
  const auto n = sc.lambda.rows();
  if (K == 0 || sc.decay.size() != K || sc.lambda.cols() != K || sc.initial.rows() != n || sc.initial.cols() != K)
    throw ConfigError("consistency: scenario shapes are inconsistent");
  for (Eigen::Index k = 0; k < K; ++k) {
    if (sc.transition[k].rows() != n || sc.transition[k].cols() != n)
      throw ConfigError("consistency: transition shape mismatch");
    if (sc.decay[k] < 0.0 || sc.decay[k] > 1.0) throw ConfigError("consistency: decay must lie in [0, 1]");
  }
  if (sc.runs < 2) throw ConfigError("consistency.runs: need at least 2 runs");

  ConsistencyReport rep;
  rep.runs = sc.runs;
  rep.horizon = sc.horizon;

  // Particle kernels and the realizability flag.
  std::vector<MatrixXd> kernel(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const bool ok = realizable(sc.transition[k], sc.decay[k]);
    rep.realizable = rep.realizable && ok;
    kernel[k] = ok ? compensated_kernel(sc.transition[k], sc.decay[k]) : sc.transition[k];
  }

  // Density recursion.
  DensityField field = DensityField::zeros(static_cast<std::size_t>(n), static_cast<std::size_t>(K), 0);
  field.rho = sc.initial;
  DensityDynamics dyn{sc.transition, sc.decay, sc.lambda, {}};
  for (std::size_t t = 1; t <= sc.horizon; ++t) {
    density_step(field, dyn, Exec::Serial);
    rep.density.push_back(field.rho);
  }

  // Particle runs. Counts are integers, so the int64 sums are exact and the
  // reduction order cannot change the result.
  const std::size_t cells = static_cast<std::size_t>(n * K) * sc.horizon;
  std::vector<std::int64_t> sum(cells, 0), sum_sq(cells, 0);
  auto one_run = [&](std::size_t run, std::vector<std::int64_t>& s, std::vector<std::int64_t>& s2) {
    RngStream rng(seed, stream_id(Phase::Consistency, run, 0));
    Eigen::MatrixXi count = sc.initial.cast<int>();
    Eigen::MatrixXi next(n, K);
    for (std::size_t t = 1; t <= sc.horizon; ++t) {
      next.setZero();
      for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const VectorXd row = kernel[k].row(i).transpose();
          for (int p = 0; p < count(i, k); ++p) {
            if (sc.decay[k] > 0.0 && rng.bernoulli(sc.decay[k])) continue;
            const auto j = rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(n)));
            ++next(static_cast<Eigen::Index>(j), k);
          }
        }
        for (Eigen::Index i = 0; i < n; ++i)
          if (sc.lambda(i, k) > 0.0) next(i, k) += static_cast<int>(rng.poisson(sc.lambda(i, k)));
      }
      count = next;
      const std::size_t base = static_cast<std::size_t>(n * K) * (t - 1);
      for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index i = 0; i < n; ++i) {
          const std::int64_t c = count(i, k);
          s[base + static_cast<std::size_t>(k * n + i)] += c;
          s2[base + static_cast<std::size_t>(k * n + i)] += c * c;
        }
    }
  };

  const auto runs = static_cast<std::int64_t>(sc.runs);
  if (exec == Exec::Parallel) {
#pragma omp parallel
    {
      std::vector<std::int64_t> s(cells, 0), s2(cells, 0);
#pragma omp for schedule(static)
      for (std::int64_t r = 0; r < runs; ++r) one_run(static_cast<std::size_t>(r), s, s2);
#pragma omp critical
      for (std::size_t c = 0; c < cells; ++c) {
        sum[c] += s[c];
        sum_sq[c] += s2[c];
      }
    }
  } else {
    for (std::int64_t r = 0; r < runs; ++r) one_run(static_cast<std::size_t>(r), sum, sum_sq);
  }

  const double R = static_cast<double>(sc.runs);
  for (std::size_t t = 1; t <= sc.horizon; ++t) {
    MatrixXd mean(n, K), se(n, K);
    const std::size_t base = static_cast<std::size_t>(n * K) * (t - 1);
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t c = base + static_cast<std::size_t>(k * n + i);
        const double m = static_cast<double>(sum[c]) / R;
        const double var = std::max(0.0, (static_cast<double>(sum_sq[c]) - R * m * m) / (R - 1.0));
        mean(i, k) = m;
        se(i, k) = std::sqrt(var / R);
        const double diff = std::abs(m - rep.density[t - 1](i, k));
        double z = 0.0;
        if (se(i, k) > 0.0)
          z = diff / se(i, k);
        else if (diff > 0.0)
          z = std::numeric_limits<double>::infinity();
        if (z > rep.max_deviation) {
          rep.max_deviation = z;
          rep.worst_node = static_cast<std::size_t>(i);
          rep.worst_type = static_cast<std::size_t>(k);
          rep.worst_step = t;
        }
      }
    }
    rep.mean.push_back(std::move(mean));
    rep.std_error.push_back(std::move(se));
  }
  return rep;
}

}  // namespace nv
