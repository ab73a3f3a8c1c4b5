#include "nv/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nv {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t stream_id(Phase phase, std::uint64_t step, std::uint64_t entity) noexcept {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(phase) * kGolden);
  h = mix64(h ^ (step + kGolden));
  h = mix64(h ^ (entity + 0x632be59bd9b4e019ULL));
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed + kGolden) ^ stream)) {}

std::uint64_t RngStream::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
  // Box-Muller, one output per pair of uniforms.
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::exponential(double mean) noexcept {
  return -mean * std::log(uniform_open());
}

bool RngStream::bernoulli(double p) noexcept { return uniform() < p; }

std::uint32_t RngStream::poisson(double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("poisson: rate must be >= 0");
  if (lambda > 700.0) throw std::invalid_argument("poisson: rate too large for inversion");
  const double u = uniform();
  double p = std::exp(-lambda);
  double cdf = p;
  std::uint32_t k = 0;
  while (u >= cdf) {
    ++k;
    p *= lambda / k;
    cdf += p;
    if (p == 0.0 && cdf <= u) break;  // tail exhausted by rounding
  }
  return k;
}

std::size_t RngStream::categorical(std::span<const double> probs) noexcept {
  const double u = uniform();
  double cdf = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cdf += probs[i];
    last_positive = i;
    if (u < cdf) return i;
  }
  return last_positive;
}

}  // namespace nv
