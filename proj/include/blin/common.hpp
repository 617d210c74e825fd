#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace blin {

// Numerical thresholds shared by every module. Defaults are the documented
// values; the CLI may override individual entries with --tol name=value.
struct Tolerances {
  double psd = 1e-8;        // smallest eigenvalue >= -psd * largest
  double num = 1e-12;       // rounding slack on norms and resolutions
  double eq = 1e-10;        // equivalence-class threshold on distance_sq
  double pinv = 1e-10;      // eigenvalues below pinv * lambda_max are dropped
  double independence = 1e-8;
  double eig = 1e-10;       // negative-eigenvalue warning threshold
  double symmetry = 1e-12;  // accepted asymmetry in user-supplied matrices

  bool set(const std::string& name, double value);
};

// Error taxonomy. Each maps onto one CLI exit code (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent belief specification.
class SpecError : public Error {
 public:
  explicit SpecError(const std::string& what) : Error(what), violations_{what} {}
  explicit SpecError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Bad input data (non-finite values, ragged rows, unparsable files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Fewer observations than an estimator needs.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Shape or argument mismatch between otherwise valid objects.
class InputError : public Error {
 public:
  using Error::Error;
};

// Unordered index pairs (i <= j) of an r x r symmetric matrix, enumerated
// row-major over the upper triangle: (0,0),(0,1),...,(0,r-1),(1,1),...
// This is the ordering of the vectorised quadratic products.
inline std::size_t slot_count(std::size_t r) { return r * (r + 1) / 2; }

inline std::size_t slot_index(std::size_t r, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return i * r - (i * (i + 1)) / 2 + j;
}

std::pair<std::size_t, std::size_t> slot_pair(std::size_t r, std::size_t slot);

/// Frobenius weight of a slot: off-diagonal slots occur twice in a symmetric matrix.
inline double slot_weight(std::size_t r, std::size_t slot) {
  const auto [i, j] = slot_pair(r, slot);
  return i == j ? 1.0 : 2.0;
}

/// "(1,2)" style 1-based label for diagnostics.
std::string slot_name(std::size_t r, std::size_t slot);

}  // namespace blin
