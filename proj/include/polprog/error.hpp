#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace polprog {

/// Runtime failure inside the pipeline (numerical, I/O after validation).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: malformed files, bad parameters, missing paths.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error(message) {}
  ValidationError(const std::string& message, std::vector<std::string> issues)
      : Error(message), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double final_violation)
      : Error(message), final_violation_(final_violation) {}

  double final_violation() const noexcept { return final_violation_; }

 private:
  double final_violation_;
};

}  // namespace polprog
