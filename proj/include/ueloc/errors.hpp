#pragma once

#include <stdexcept>

namespace ueloc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Zero distance where a path gain or a direction is required.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// A delay tap falls outside the resolvable window of the channel vector.
class PathOverflowError : public Error {
 public:
  using Error::Error;
};

// l_m + tau_m < 0: the UE would see inter-symbol interference.
class AssumptionViolationError : public Error {
 public:
  using Error::Error;
};

class NoLosDetectedError : public Error {
 public:
  using Error::Error;
};

class UnderDeterminedError : public Error {
 public:
  using Error::Error;
};

class InstanceTooLargeError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ueloc
