#pragma once

#include <cstdint>
#include <span>

namespace nv {

// Execution policy for the data-parallel kernels. Both paths produce
// bitwise-identical results; Serial is the reference.
enum class Exec { Serial, Parallel };

// Phases that own distinct random streams. Adding a new phase must append,
// never reorder, or every recorded trajectory changes.
enum class Phase : std::uint32_t {
  Init = 1,
  Data = 2,
  Emit = 3,
  Spawn = 4,
  Move = 5,
  Dock = 6,
  Decay = 7,
  Policy = 8,
  SnnInput = 9,
  Consistency = 10,
  Graph = 11,
  Test = 12,
};

std::uint64_t mix64(std::uint64_t x) noexcept;

// Stream identifier for one (phase, step, entity) triple.
std::uint64_t stream_id(Phase phase, std::uint64_t step, std::uint64_t entity) noexcept;

// Counter-based generator: draw i of stream (seed, stream) is a pure
// function of (seed, stream, i). Distributions are implemented here rather
// than through <random> so the byte stream is identical on every platform.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t draws() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  // [0, 1)
  double uniform() noexcept;
  // (0, 1)
  double uniform_open() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  double exponential(double mean) noexcept;
  bool bernoulli(double p) noexcept;
  // Inversion sampler; exact for the small rates used here. Throws for
  // rates where exp(-lambda) underflows.
  std::uint32_t poisson(double lambda);
  // Inverse-CDF categorical draw; ties resolve to the lower index.
  std::size_t categorical(std::span<const double> probs) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace nv
