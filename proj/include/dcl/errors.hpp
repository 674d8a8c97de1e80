#pragma once

#include <stdexcept>
#include <string>

namespace dcl {

/// A matrix that was required to be symmetric positive definite is not.
class NotSpd : public std::runtime_error {
 public:
  NotSpd(const std::string& what, double min_eigenvalue)
      : std::runtime_error(what + " (min eigenvalue " + std::to_string(min_eigenvalue) + ")"),
        min_eigenvalue_(min_eigenvalue) {}

  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bow-free enumeration found no grid point reproducing the target covariance.
class GridTooCoarse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dcl
