#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace trustlab {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid profile bounds, thresholds, study configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed input data: bad option index, missing explanation, unparseable file row.
class DataError : public Error {
public:
  using Error::Error;
};

/// Text-generation backend failed or produced nothing usable.
class GenerationError : public Error {
public:
  using Error::Error;
};

/// Re-enrollment and similar state conflicts in the study service.
class ConflictError : public Error {
public:
  using Error::Error;
};

}  // namespace trustlab
