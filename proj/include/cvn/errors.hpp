#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace cvn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Raised for invalid sizes passed to constructors (m < 1, t < 1, ...).
class InvalidDimension : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public NumericError {
 public:
  using NumericError::NumericError;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class EmptyData : public Error {
 public:
  using Error::Error;
};

class DegenerateVariable : public Error {
 public:
  DegenerateVariable(std::string variable, const std::string& what)
      : Error(what), variable_(std::move(variable)) {}
  const std::string& variable() const noexcept { return variable_; }

 private:
  std::string variable_;
};

class DegenerateState : public Error {
 public:
  using Error::Error;
};

// Inner wFLSA iteration hit its cap. Carries the last iterate and residuals;
// edge() is (-1,-1) unless the failure was annotated by the Z-step.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, Eigen::VectorXd last_iterate,
                     double primal_residual, double dual_residual)
      : Error(what),
        last_iterate_(std::move(last_iterate)),
        primal_residual_(primal_residual),
        dual_residual_(dual_residual) {}

  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
  double primal_residual() const noexcept { return primal_residual_; }
  double dual_residual() const noexcept { return dual_residual_; }
  std::pair<int, int> edge() const noexcept { return edge_; }

  ConvergenceFailure with_edge(int s, int t) const {
    ConvergenceFailure out(std::string(what()) + " at edge (" + std::to_string(s) +
                               "," + std::to_string(t) + ")",
                           last_iterate_, primal_residual_, dual_residual_);
    out.edge_ = {s, t};
    return out;
  }

 private:
  Eigen::VectorXd last_iterate_;
  double primal_residual_;
  double dual_residual_;
  std::pair<int, int> edge_{-1, -1};
};

class NoConvergedCell : public Error {
 public:
  using Error::Error;
};

class EmptyGrid : public Error {
 public:
  using Error::Error;
};

}  // namespace cvn
