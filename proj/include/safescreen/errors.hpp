#pragma once

#include <stdexcept>
#include <string>

namespace safescreen {

/// Vector or matrix sizes that do not agree with the problem dimension.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Loss of positive definiteness or another numerical breakdown.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dimension(long got, long expected, const char* what) {
  if (got != expected) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace safescreen
