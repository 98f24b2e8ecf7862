#pragma once

#include <stdexcept>
#include <string>

namespace dewarp {

// Error taxonomy shared by every module. The CLI maps these onto stable
// exit codes: UsageError -> 1, DataError -> 2, NumericError -> 3.

// Caller misuse: bad shapes, invalid flags, contract violations.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape / dimension mismatches between tensors, grids or images.
class DimensionError : public UsageError {
 public:
  explicit DimensionError(const std::string& msg) : UsageError(msg) {}
};

// Unreadable, missing or corrupt files; dataset integrity failures.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf escapes, diverging losses, failed gradient checks.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A synthetic warp whose dense map cannot be inverted reliably
// (fold-over after retries, too many interior holes when splatting).
class DegenerateWarpError : public DataError {
 public:
  explicit DegenerateWarpError(const std::string& msg) : DataError(msg) {}
};

}  // namespace dewarp
