#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nv/config.hpp"
#include "nv/coupled_sim.hpp"
#include "nv/density.hpp"
#include "nv/snn.hpp"

namespace nv {

// Builders shared by every mode. Each draws from its own Init stream so
// adding a component never shifts another's initial values.
Graph build_graph(const ExperimentConfig& cfg);
NetworkState build_network(const ExperimentConfig& cfg, const Graph& g);
VesicleTypeRegistry build_registry(const ExperimentConfig& cfg, const Graph& g, const std::vector<int>& widths,
                                   int feature_dim);
SimOptions build_sim_options(const ExperimentConfig& cfg);
SnnOptions build_snn_options(const ExperimentConfig& cfg);
ConsistencyScenario build_scenario(const ExperimentConfig& cfg);
CoupledSim build_coupled_sim(const ExperimentConfig& cfg);

// Shortest round-trip decimal form, identical on every platform.
std::string format_number(double x);

struct RunSummary {
  std::string mode;
  std::size_t steps = 0;
  std::vector<std::filesystem::path> files;
};

// Runs cfg.run.mode and writes its outputs into `out` (created if
// missing). Every mode writes metrics.csv, events.log and
// resolved_config.json. NumericalError propagates to the caller.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

}  // namespace nv
