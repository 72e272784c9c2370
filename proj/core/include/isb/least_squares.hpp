#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace isb {

struct LeastSquaresProblem {
  // Weighted residual vector; the objective is its squared norm.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
  Eigen::VectorXd lower;  // empty = unbounded
  Eigen::VectorXd upper;
};

struct LeastSquaresOptions {
  int max_iterations = 200;
  double step_tol = 1e-8;     // relative parameter step
  double fd_rel_step = 1e-6;  // central differences
  double initial_damping = 1e-3;
};

struct LeastSquaresResult {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;  // at params
  double objective = 0.0;
  std::vector<double> history;  // objective after every accepted step, starting with the initial point
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<bool> at_bound;
  std::string message;
};

// Damped Gauss-Newton (Levenberg-Marquardt with Marquardt scaling) on a box. A step is accepted
// only when it lowers the objective, so history is non-increasing.
LeastSquaresResult levenberg_marquardt(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& options = {});

// s^2 (J^T J)^{-1} with s^2 = objective / (m - n), or the plain inverse when scale_by_residual is false.
// Non-finite entries when J^T J is singular.
Eigen::MatrixXd parameter_covariance(const LeastSquaresResult& result, bool scale_by_residual = true);

}  // namespace isb
