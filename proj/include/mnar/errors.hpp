#pragma once

#include <stdexcept>
#include <string>

namespace mnar {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument lengths disagree.
struct DimensionError : Error {
  using Error::Error;
};

// Parameter outside its admissible range.
struct DomainError : Error {
  using Error::Error;
};

// Not enough data (or too much) for the requested computation.
struct SizeError : Error {
  using Error::Error;
};

// Estimator has nothing to work with, e.g. no observed entries.
struct EstimationError : Error {
  using Error::Error;
};

// Data does not fit the model an operation assumes.
struct ModelError : Error {
  using Error::Error;
};

// Bad scenario/config file.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace mnar
