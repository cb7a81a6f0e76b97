#pragma once

#include <stdexcept>
#include <string>

namespace palmlab {

/// Caller violated an operation's contract (bad argument, wrong carrier, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A translated point left the simulated region.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A structural precondition on the input configuration failed (separation, clipping).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Not enough data for the requested statistic.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace palmlab
