#pragma once

#include <functional>

#include <Eigen/Dense>

namespace vvs {

struct LbfgsOptions {
  int max_iterations = 500;
  // Stop when the largest absolute gradient component falls below this.
  double gradient_tolerance = 1e-6;
  int history = 10;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;  // max-abs
  int iterations = 0;
  bool converged = false;
};

// Objective: returns f(x) and writes the gradient into grad.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

// Limited-memory BFGS with a backtracking Armijo line search.
LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& options = {});

}  // namespace vvs
