#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "nv/graph.hpp"
#include "nv/rng.hpp"
#include "nv/vesicle.hpp"

namespace nv {

// Per-node, per-type mass and mass-weighted mean content.
struct DensityField {
  MatrixXd rho;                        // |V| x K, non-negative
  std::vector<MatrixXd> mean_content;  // K entries of |V| x d_c

  static DensityField zeros(std::size_t num_nodes, std::size_t num_types, int content_dim);
  std::size_t num_nodes() const { return static_cast<std::size_t>(rho.rows()); }
  std::size_t num_types() const { return static_cast<std::size_t>(rho.cols()); }
  double total_mass(TypeId k) const { return rho.col(static_cast<Eigen::Index>(k)).sum(); }
};

// Everything one density step needs for each type.
struct DensityDynamics {
  std::vector<MatrixXd> transition;  // K row-stochastic |V| x |V|
  VectorXd decay;                    // K rates in [0, 1]
  MatrixXd lambda;                   // |V| x K emission rates
  std::vector<MatrixXd> emit_content;  // K entries of |V| x d_c (empty: zero content)

  static DensityDynamics from_registry(const VesicleTypeRegistry& reg, const MatrixXd& lambda);
};

// rho' = T^T rho - delta rho + lambda per type, with mean content mixed by
// mass. Negative entries are clamped to zero; returns how many were.
std::size_t density_step(DensityField& field, const DensityDynamics& dyn, Exec exec = Exec::Parallel);

// Mass below this counts as empty and resets the mean content to zero.
constexpr double kEmptyMass = 1e-12;

// sum_k rho[node][k] * (gamma(C) . h + beta(C)), budget taken as 1. With
// `dock_prob` (one mean docking probability per type) each term is also
// scaled by it.
VectorXd expected_release(const DensityField& field, const VesicleTypeRegistry& reg, NodeId node,
                          std::size_t layer, const VectorXd& h,
                          const std::optional<VectorXd>& dock_prob = std::nullopt);

// Linear particle scenario matched to one density recursion: Poisson
// emissions with fixed rates, geometric removal, migration, no docking.
struct ConsistencyScenario {
  std::vector<MatrixXd> transition;
  VectorXd decay;
  MatrixXd lambda;
  MatrixXd initial;  // integer counts, |V| x K
  std::size_t horizon = 20;
  std::size_t runs = 10000;

  // 3-node chain with self-loops, uniform T over each support, lambda at
  // node 0 only.
  static ConsistencyScenario lazy_chain(double lambda0, double decay, std::size_t horizon, std::size_t runs);
  // Same chain without self-loops; its kernel has T_ii < delta at nodes 0
  // and 1, so no particle process has the recursion as its mean.
  static ConsistencyScenario strict_chain(double lambda0, double decay, std::size_t horizon, std::size_t runs);
};

// A particle survives with probability 1 - delta and then moves with
// T' = (T - delta I) / (1 - delta), which makes E[N(t+1)] equal the density
// recursion exactly. T' is a valid kernel only when T_ii >= delta on every
// node; otherwise particles fall back to moving with T and the check
// reports `realizable = false`.
bool realizable(const MatrixXd& transition, double decay);
MatrixXd compensated_kernel(const MatrixXd& transition, double decay);

struct ConsistencyReport {
  double max_deviation = 0.0;  // max |mean - rho| / standard error
  std::size_t worst_node = 0;
  std::size_t worst_type = 0;
  std::size_t worst_step = 0;
  bool realizable = true;
  std::size_t runs = 0;
  std::size_t horizon = 0;
  std::vector<MatrixXd> density;  // index t-1 for t = 1..horizon
  std::vector<MatrixXd> mean;
  std::vector<MatrixXd> std_error;
};

ConsistencyReport consistency_check(const ConsistencyScenario& sc, std::uint64_t seed, Exec exec = Exec::Parallel);

}  // namespace nv
