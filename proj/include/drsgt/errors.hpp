#pragma once

#include <stdexcept>
#include <string>

namespace drsgt {

// All library errors derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// An invariant of a domain type was violated (off-manifold point,
// non-tangent vector, mismatched base point).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Euclidean mean of Stiefel points lost column rank; the IAM is not unique.
class DegenerateMeanError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class ScheduleError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace drsgt
