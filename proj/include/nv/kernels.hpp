#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nv/graph.hpp"
#include "nv/rng.hpp"
#include "nv/vesicle.hpp"

namespace nv {

// Probabilities produced by the kernels never reach exactly 0 or 1.
constexpr double kProbFloor = 1e-12;
double sigmoid(double z);
double clamp_prob(double p);

struct EmissionEvent {
  NodeId node = 0;
  TypeId type = 0;
  std::uint32_t count = 0;
  double intensity = 0.0;
};

// u_kappa . psi_emit(features) with psi_emit = tanh(affine).
double emission_logit(const VesicleTypeRegistry& reg, TypeId type, const VectorXd& features);
double emission_intensity(const VesicleTypeRegistry& reg, TypeId type, const VectorXd& features);

// |V| x K table of intensities, or `frozen` verbatim when supplied.
MatrixXd emission_table(const VesicleTypeRegistry& reg, const MatrixXd& features,
                        const std::optional<MatrixXd>& frozen = std::nullopt);

struct EmissionOptions {
  int max_emit_per_node = 4;            // clamp per (node, type)
  std::optional<MatrixXd> frozen;       // |V| x K intensities bypassing the sigmoid
};

// Poisson(lambda) count per (node, type), node-major order, one RNG stream
// per pair. Returns every pair, including zero counts.
std::vector<EmissionEvent> sample_emissions(const VesicleTypeRegistry& reg, const MatrixXd& features,
                                            const EmissionOptions& opts, std::uint64_t seed,
                                            std::uint64_t step, Exec exec = Exec::Parallel);

// P(l') proportional to T[l][l'] * exp(gamma * q_move(l')), q_move = gradient
// norm feature of l'. Falls back to a point mass on the current node if the
// row is degenerate.
VectorXd migration_distribution(const VesicleTypeRegistry& reg, const Vesicle& v, const MatrixXd& features);
NodeId sample_move(const VectorXd& dist, RngStream& rng);

double docking_logit(const VesicleTypeRegistry& reg, const Vesicle& v, const VectorXd& node_features);
double docking_probability(const VesicleTypeRegistry& reg, const Vesicle& v, const VectorXd& node_features);

// Batched per-vesicle kernels. Stream per (phase, step, vesicle id), so the
// parallel path is bitwise identical to the serial one and independent of
// how many other vesicles exist.
std::vector<NodeId> sample_moves(const VesicleTypeRegistry& reg, std::span<const Vesicle> vesicles,
                                 const MatrixXd& features, std::uint64_t seed, std::uint64_t step,
                                 Exec exec = Exec::Parallel);
std::vector<char> sample_docks(const VesicleTypeRegistry& reg, std::span<const Vesicle> vesicles,
                               const MatrixXd& features, std::uint64_t seed, std::uint64_t step,
                               Exec exec = Exec::Parallel);

struct DecayOptions {
  double dt = 1.0;
  double noise_std = 0.0;
};

struct RemovedVesicle {
  VesicleId id = 0;
  NodeId node = 0;
  double lifetime = 0.0;  // value that triggered removal
  bool absorbed = false;
};

// tau <- tau - dt + noise; removes tau <= 0 and every id in `absorbed`
// (sorted). Returns removals in id order.
std::vector<RemovedVesicle> decay_step(VesicleConfig& cfg, const DecayOptions& opts, std::uint64_t seed,
                                       std::uint64_t step, std::span<const VesicleId> absorbed = {});

}  // namespace nv
