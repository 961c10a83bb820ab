#pragma once

#include <stdexcept>
#include <string>

namespace posbias {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or contradictory run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be loaded or violates a probe invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace posbias
