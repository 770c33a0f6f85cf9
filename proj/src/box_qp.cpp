#include "evmpc/box_qp.hpp"

#include <vector>

namespace evmpc {

namespace {

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

double value(const Eigen::MatrixXd& h, const Eigen::VectorXd& c, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(h * x) - c.dot(x);
}

}  // namespace

double box_qp_residual(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                       const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                       const Eigen::VectorXd& x) {
  const Eigen::VectorXd grad = hessian * x - linear;
  return (x - clamp(x - grad, lower, upper)).lpNorm<Eigen::Infinity>();
}

BoxQpResult solve_box_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const Eigen::VectorXd& start, double tolerance, int max_iterations) {
  const Eigen::Index n = linear.size();
  BoxQpResult out;
  out.x = clamp(start, lower, upper);

  std::vector<Eigen::Index> free;
  free.reserve(static_cast<std::size_t>(n));
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd grad = hessian * out.x - linear;
    out.residual = (out.x - clamp(out.x - grad, lower, upper)).lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual <= tolerance) {
      out.converged = true;
      return out;
    }

    // A coordinate is clamped when it sits on a bound and the descent direction points outward.
    free.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lower = out.x(i) <= lower(i) && grad(i) > 0.0;
      const bool at_upper = out.x(i) >= upper(i) && grad(i) < 0.0;
      if (!(at_lower || at_upper)) free.push_back(i);
    }

    Eigen::VectorXd direction = Eigen::VectorXd::Zero(n);
    if (!free.empty()) {
      const auto m = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd h_ff(m, m);
      Eigen::VectorXd g_f(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        g_f(a) = grad(free[a]);
        for (Eigen::Index b = 0; b < m; ++b) h_ff(a, b) = hessian(free[a], free[b]);
      }
      const Eigen::VectorXd step = h_ff.llt().solve(-g_f);
      for (Eigen::Index a = 0; a < m; ++a) direction(free[a]) = step(a);
    }

    const double f0 = value(hessian, linear, out.x);
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd trial = clamp(out.x + alpha * direction, lower, upper);
      const double decrease = grad.dot(trial - out.x);
      if (value(hessian, linear, trial) <= f0 + 1e-4 * decrease) {
        moved = (trial - out.x).lpNorm<Eigen::Infinity>() > 0.0;
        out.x = trial;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      // Newton direction stalled on the active set; fall back to a projected gradient step.
      const double lipschitz = hessian.cwiseAbs().rowwise().sum().maxCoeff();
      out.x = clamp(out.x - grad / lipschitz, lower, upper);
    }
  }
  out.residual = box_qp_residual(hessian, linear, lower, upper, out.x);
  out.iterations = max_iterations;
  out.converged = out.residual <= tolerance;
  return out;
}

BoxQpResult solve_box_qp_gradient(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                  const Eigen::VectorXd& start, double lipschitz, double tolerance,
                                  int max_iterations) {
  BoxQpResult out;
  out.x = clamp(start, lower, upper);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd grad = hessian * out.x - linear;
    const Eigen::VectorXd next = clamp(out.x - grad / lipschitz, lower, upper);
    out.residual = (out.x - clamp(out.x - grad, lower, upper)).lpNorm<Eigen::Infinity>();
    out.iterations = it;
    if (out.residual <= tolerance) {
      out.converged = true;
      return out;
    }
    out.x = next;
  }
  out.residual = box_qp_residual(hessian, linear, lower, upper, out.x);
  out.iterations = max_iterations;
  out.converged = out.residual <= tolerance;
  return out;
}

}  // namespace evmpc
