#pragma once

#include <stdexcept>
#include <string>

namespace nv {

// Bad or inconsistent experiment configuration (also dimension mismatches
// that can only come from a bad config).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// backward() called after the parameters changed, or a rule release asked
// for gradients that no longer match the parameters.
class StaleStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf detected in simulation state. `dump` carries the event log
// rendered as NDJSON so the caller can persist it.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::string dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::string& dump() const noexcept { return dump_; }

 private:
  std::string dump_;
};

}  // namespace nv
