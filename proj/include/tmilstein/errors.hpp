#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tmil {

/// A coefficient function returned a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::vector<double> at)
      : std::runtime_error(what), point_(std::move(at)) {}

  const std::vector<double>& point() const noexcept { return point_; }

 private:
  std::vector<double> point_;
};

/// An argument violated a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An experiment could not produce a meaningful result (e.g. reference blow-up).
class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tmil
