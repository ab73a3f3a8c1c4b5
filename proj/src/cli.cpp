#include "nv/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <omp.h>

#include "nv/errors.hpp"
#include "nv/harness.hpp"

namespace nv {

namespace {

void apply_thread_cap(std::ostream& err) {
  const char* env = std::getenv("NV_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    err << "nvsim: ignoring NV_THREADS=" << env << " (expected a positive integer)\n";
    return;
  }
  omp_set_num_threads(static_cast<int>(n));
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neuro-vesicle simulator"};
  app.name("nvsim");
  std::string config_path;
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::string out_dir;
  bool emit_plots = false;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* mode_opt = app.add_option("--mode", mode, "particle | density | consistency | snn | rl")
                       ->check(CLI::IsMember({"particle", "density", "consistency", "snn", "rl"}));
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  auto* steps_opt = app.add_option("--steps", steps, "Steps (policy updates in rl mode)");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory");
  app.add_flag("--emit-plots", emit_plots, "Also write per-step per-node plot tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "nvsim: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  ConfigOverrides ov;
  if (*mode_opt) ov.mode = mode;
  if (*seed_opt) ov.seed = seed;
  if (*steps_opt) ov.steps = steps;
  if (*out_opt) ov.out = out_dir;
  if (emit_plots) ov.emit_plots = true;

  apply_thread_cap(err);
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path, ov);
  } catch (const ConfigError& e) {
    err << "nvsim: config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::filesystem::path dir = cfg.run.out;
  try {
    const RunSummary sum = run_experiment(cfg, dir);
    out << "nvsim: mode=" << sum.mode << " steps=" << sum.steps << " config=" << hex_digest(config_digest(cfg))
        << '\n';
    for (const auto& f : sum.files) out << "  " << f.string() << '\n';
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "nvsim: numerical abort: " << e.what() << '\n';
    if (!e.dump().empty()) {
      std::ofstream dump(dir / "nan_dump.log", std::ios::binary | std::ios::trunc);
      dump << e.dump();
      err << "nvsim: state dump written to " << (dir / "nan_dump.log").string() << '\n';
    }
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "nvsim: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "nvsim: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace nv
