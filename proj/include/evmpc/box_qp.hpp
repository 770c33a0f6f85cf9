// Dense box-constrained convex QP:  minimize 1/2 x'Hx - c'x  s.t. lower <= x <= upper.
// H must be symmetric positive definite.

#pragma once

#include <Eigen/Dense>

namespace evmpc {

struct BoxQpResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;  // infinity norm of x - clamp(x - grad)
  bool converged = false;
};

/// Projected Newton with an active set of clamped coordinates and Armijo
/// backtracking along the projection arc. Exact once the active set settles.
BoxQpResult solve_box_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const Eigen::VectorXd& start, double tolerance, int max_iterations = 200);

/// Projected gradient with fixed step 1 / lipschitz.
BoxQpResult solve_box_qp_gradient(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                  const Eigen::VectorXd& start, double lipschitz, double tolerance,
                                  int max_iterations);

double box_qp_residual(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                       const Eigen::VectorXd& x);

}  // namespace evmpc
