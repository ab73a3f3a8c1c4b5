#pragma once

#include <iosfwd>

namespace nv {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitNumerical = 4,
};

// nvsim --config PATH [--mode M] [--seed N] [--steps N] [--out DIR] [--emit-plots]
// NV_THREADS caps the OpenMP thread count.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nv
