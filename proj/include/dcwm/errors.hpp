#pragma once

#include <stdexcept>
#include <string>

namespace dcwm {

// Bad or missing run configuration (unknown key, unparsable value, ...).
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch between tensors / layers.  Message names the offending op.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: stale tape, stepping a finished episode, invalid code row, ...
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (losses, gradients,
// TD targets).  The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint problems, split so tests can tell them apart.
struct CheckpointVersionError : std::runtime_error {
  explicit CheckpointVersionError(const std::string& msg) : std::runtime_error(msg) {}
};
struct CheckpointTruncatedError : std::runtime_error {
  explicit CheckpointTruncatedError(const std::string& msg) : std::runtime_error(msg) {}
};
struct CheckpointShapeError : std::runtime_error {
  explicit CheckpointShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dcwm
