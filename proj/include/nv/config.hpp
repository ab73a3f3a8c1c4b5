#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nv/graph.hpp"
#include "nv/rng.hpp"

namespace nv {

struct GraphConfig {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  std::vector<int> layer_of;
  bool allow_self_loops = false;
  std::string granularity = "layer";  // layer | neuron
};

struct NetworkConfig {
  std::vector<int> widths{4, 8, 8, 2};
  double init_scale = 0.0;  // <= 0: 1/sqrt(fan_in)
  double learning_rate = 0.05;
  int meta_window = 16;
  std::string task = "sine";
};

struct TypeConfig {
  double lifetime_mean = 3.0;
  std::string lifetime_dist = "exponential";  // exponential | fixed
  double decay_rate = 0.1;
  double temperature = 0.0;
  std::optional<Eigen::MatrixXd> transition;
  double emit_scale = 1.0;
  double dock_scale = 1.0;
  bool force_dock = false;
  double content_std = 1.0;
  double mod_scale = 1.0;
};

struct VesicleConfigSection {
  int content_dim = 4;
  int emit_dim = 4;
  int dock_dim = 4;
  int num_types = 1;
  double init_scale = 0.5;
  std::vector<TypeConfig> types{TypeConfig{}};
};

struct KernelConfig {
  int max_emit_per_node = 4;
  double decay_noise_std = 0.0;
  std::vector<NodeId> absorber_nodes;
  double dt = 1.0;
  std::optional<Eigen::MatrixXd> frozen_emission;
  std::vector<std::pair<NodeId, std::size_t>> scripted_emission;
  std::string exec = "parallel";  // parallel | serial
};

struct ReleaseConfig {
  bool act = true;
  bool param = true;
  bool rule = true;
  bool memory = true;
  int d_m = 2;
  double rho_write = 0.1;
  double init_scale = 0.1;  // 0 makes every release map zero
  double param_step = 0.01;
};

struct DensityConfig {
  std::optional<Eigen::MatrixXd> initial;
  bool fold_dock_prob = false;
  bool inject = false;
};

struct ConsistencyConfig {
  std::string scenario = "lazy_chain";  // lazy_chain | strict_chain | config
  double lambda0 = 0.3;
  double decay = 0.2;
  std::size_t horizon = 20;
  std::size_t runs = 10000;
};

struct SnnConfig {
  double dt = 1.0;
  double tau_m = 10.0;
  double tau_e = 5.0;
  double threshold = 1.0;
  double refractory = 2.0;
  double a_plus = 1.0;
  double a_minus = 0.5;
  double eta = 0.01;
  std::size_t radius = 1;
  double window = 5.0;
  std::string rule = "three_factor";  // three_factor | darwin3
  double a_pre = 0.0;
  double a_post = 0.0;
  double input_rate = 0.1;
  double input_weight = 12.0;
  double bias_current = 0.0;
  double weight_init = 2.0;
  std::size_t neurons = 16;
  double connect_prob = 0.2;
  std::uint64_t graph_seed = 1;
};

struct RlConfig {
  double gamma = 0.99;
  double learning_rate = 0.01;
  double omega_coeff = 0.01;
  std::size_t horizon = 20;
  int hidden = 8;
  double baseline_decay = 0.99;
  double init_scale = 0.1;
  std::size_t batch = 1;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t steps = 100;
  std::string mode = "particle";  // particle | density | consistency | snn | rl
  int vesicle_every = 1;
  std::string out = "out";
  bool emit_plots = false;
};

struct ExperimentConfig {
  GraphConfig graph;
  NetworkConfig network;
  VesicleConfigSection vesicles;
  KernelConfig kernels;
  ReleaseConfig release;
  DensityConfig density;
  ConsistencyConfig consistency;
  SnnConfig snn;
  RlConfig rl;
  RunConfig run;
};

// Command-line values that take precedence over the file's run section.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<bool> emit_plots;
};

// JSON in, fully resolved config out: defaults applied, the graph made
// explicit. Throws ConfigError naming the key path on unknown keys, type
// mismatches and constraint violations. Without an explicit graph, layer
// granularity gives a chain with one node per layer and neuron granularity
// (the default in snn mode) a random graph from the snn section.
ExperimentConfig parse_config(std::string_view text, const ConfigOverrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

// Canonical JSON: fixed key order, every tunable present.
std::string dump_config(const ExperimentConfig& cfg);
std::uint64_t config_digest(const ExperimentConfig& cfg);

// Every key path the parser accepts; list entries are written "types[]".
const std::vector<std::string>& config_keys();

bool is_mode(std::string_view mode);
Exec exec_policy(const ExperimentConfig& cfg);

}  // namespace nv
