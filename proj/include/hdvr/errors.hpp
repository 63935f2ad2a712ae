#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdvr {

// Report-style result for structural checks: empty `violations` means ok.
struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  explicit operator bool() const noexcept { return ok(); }

  void add(std::string message) { violations.push_back(std::move(message)); }

  bool mentions(const std::string& needle) const {
    for (const auto& v : violations) {
      if (v.find(needle) != std::string::npos) return true;
    }
    return false;
  }

  std::string str() const {
    std::ostringstream oss;
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i) oss << "; ";
      oss << violations[i];
    }
    return oss.str();
  }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: invalid tree, bad partition, unparsable file, bad dimensions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Iteration blew up (residual growth or non-finite values).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Iteration cap hit before the tolerance was met.
class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// vi^2 <= 0 during a forward sweep.
class VoltageCollapseError : public Error {
 public:
  using Error::Error;
};

// An agent tried to hold or read data outside its information scope.
class InformationHidingError : public Error {
 public:
  using Error::Error;
};

}  // namespace hdvr
