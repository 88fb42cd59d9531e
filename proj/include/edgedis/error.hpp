#pragma once

#include <stdexcept>
#include <string>

namespace edgedis {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or size disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Out-of-range node/edge index.
struct IndexError : Error {
  using Error::Error;
};

// Invalid configuration value or combination.
struct ConfigError : Error {
  using Error::Error;
};

// Dataset ingestion / generation failure.
struct DataError : Error {
  using Error::Error;
};

// Sampler cannot satisfy the requested batch.
struct SamplingError : Error {
  using Error::Error;
};

// A documented precondition was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Numerical failure during optimization (non-finite loss/gradient).
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace edgedis
