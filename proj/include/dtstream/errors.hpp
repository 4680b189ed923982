#pragma once

#include <stdexcept>
#include <string>

namespace dtstream {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A delivery was scheduled with zero bandwidth or zero compute.
class InfeasibleAllocation : public Error {
 public:
  using Error::Error;
};

// An executed decision set broke one of the slot constraints.
class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class FitFailure : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient inside the learner.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtstream
