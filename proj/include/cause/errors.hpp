#pragma once

#include <stdexcept>
#include <string>

namespace cause {

// Invalid configuration: bad dimensions, schema violations, unknown enum names.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problems with dataset files or vocabulary lookups.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure during training (non-finite loss, divergence).
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Corrupt, truncated or incompatible checkpoint on disk.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cause
