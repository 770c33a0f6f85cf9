#include "evmpc/dso_agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evmpc/box_qp.hpp"

namespace evmpc {

double generation_cost(double q, const DSOSpec& dso) { return dso.a * q * q + dso.b * q; }

double storage_tracking_penalty(double x_now, std::span<const double> p_s, const StorageSpec& storage,
                                double slot_hours) {
  const double k = storage.delta_s * slot_hours;
  double stored = x_now;
  double total = 0.0;
  for (double p : p_s) {
    stored -= p * k;
    const double dev = stored - storage.x_ref;
    total += dev * dev;
  }
  return total;
}

double dso_objective(const DSOSubproblem& sub, std::span<const double> p_l, std::span<const double> p_s) {
  double value = 0.0;
  for (std::size_t i = 0; i < p_l.size(); ++i) {
    value += sub.prices[i] * p_l[i] - generation_cost(p_l[i] - p_s[i], sub.dso);
  }
  return value -
         sub.storage.rho * storage_tracking_penalty(sub.x_now, p_s, sub.storage, sub.window.slot_hours());
}

namespace {

struct QpForm {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

// Negated objective as 1/2 x'Hx - c'x + const over x = [P_l; P_s].
QpForm qp_form(const DSOSubproblem& sub) {
  const Eigen::Index n = sub.window.n();
  const double a = sub.dso.a;
  const double k = sub.storage.delta_s * sub.window.slot_hours();
  const double rho = sub.storage.rho;
  const double drift = sub.x_now - sub.storage.x_ref;

  QpForm f;
  f.hessian = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  f.linear.resize(2 * n);
  f.lower.resize(2 * n);
  f.upper.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.hessian(i, i) = 2.0 * a;
    f.hessian(i, n + i) = -2.0 * a;
    f.hessian(n + i, i) = -2.0 * a;
    for (Eigen::Index j = 0; j < n; ++j) {
      // number of cumulative sums containing both P_s(i) and P_s(j)
      const double shared = static_cast<double>(n - std::max(i, j));
      f.hessian(n + i, n + j) += 2.0 * rho * k * k * shared;
    }
    f.hessian(n + i, n + i) += 2.0 * a;

    f.linear(i) = sub.prices[static_cast<std::size_t>(i)] - sub.dso.b;
    f.linear(n + i) = sub.dso.b + 2.0 * rho * k * drift * static_cast<double>(n - i);

    f.lower(i) = sub.dso.p_min;
    f.upper(i) = sub.dso.p_max;
    f.lower(n + i) = sub.storage.ps_min;
    f.upper(n + i) = sub.storage.ps_max;
  }
  return f;
}

}  // namespace

double dso_kkt_residual(const DSOSubproblem& sub, std::span<const double> p_l, std::span<const double> p_s) {
  const std::size_t n = p_l.size();
  const double k = sub.storage.delta_s * sub.window.slot_hours();
  const double rho = sub.storage.rho;

  // tail(i) = sum_{j >= i} (x_j - x_ref), where x_j is the stored energy after slot j
  std::vector<double> tail(n + 1, 0.0);
  {
    std::vector<double> dev(n);
    double stored = sub.x_now;
    for (std::size_t j = 0; j < n; ++j) {
      stored -= p_s[j] * k;
      dev[j] = stored - sub.storage.x_ref;
    }
    for (std::size_t j = n; j-- > 0;) tail[j] = tail[j + 1] + dev[j];
  }

  auto violation = [](double x, double lo, double hi, double grad) {
    const double slack = 1e-9 * std::max(1.0, std::abs(hi - lo));
    if (x < lo - slack || x > hi + slack) return std::numeric_limits<double>::infinity();
    if (hi - lo <= slack) return 0.0;
    if (x <= lo + slack) return std::max(0.0, grad);
    if (x >= hi - slack) return std::max(0.0, -grad);
    return std::abs(grad);
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double marginal = 2.0 * sub.dso.a * (p_l[i] - p_s[i]) + sub.dso.b;
    const double grad_l = sub.prices[i] - marginal;
    const double grad_s = marginal + 2.0 * rho * k * tail[i];
    worst = std::max(worst, violation(p_l[i], sub.dso.p_min, sub.dso.p_max, grad_l));
    worst = std::max(worst, violation(p_s[i], sub.storage.ps_min, sub.storage.ps_max, grad_s));
  }
  return worst;
}

DSOSolution solve_dso(const DSOSubproblem& sub, const Tolerances& eps, DsoMethod method,
                      const DSOSolution* warm_start) {
  const std::size_t n = static_cast<std::size_t>(sub.window.n());
  if (sub.prices.size() != n) throw std::invalid_argument("solve_dso: price vector length differs from window");

  const QpForm qp = qp_form(sub);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * n));
  if (warm_start && warm_start->p_l.size() >= n && warm_start->p_s.size() >= n) {
    for (std::size_t i = 0; i < n; ++i) {
      start(static_cast<Eigen::Index>(i)) = warm_start->p_l[i];
      start(static_cast<Eigen::Index>(n + i)) = warm_start->p_s[i];
    }
  }

  // The QP residual uses a unit step; a tighter target keeps the KKT residual
  // of the original variables below eps.kkt as well.
  const double target = 0.1 * eps.kkt;
  BoxQpResult r;
  if (method == DsoMethod::projected_newton) {
    r = solve_box_qp(qp.hessian, qp.linear, qp.lower, qp.upper, start, target);
  } else {
    const double lipschitz = qp.hessian.cwiseAbs().rowwise().sum().maxCoeff();
    r = solve_box_qp_gradient(qp.hessian, qp.linear, qp.lower, qp.upper, start, lipschitz, target,
                              eps.max_dso_iterations);
  }

  DSOSolution sol;
  sol.iterations = r.iterations;
  sol.p_l.resize(n);
  sol.p_s.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.p_l[i] = r.x(static_cast<Eigen::Index>(i));
    sol.p_s[i] = r.x(static_cast<Eigen::Index>(n + i));
  }
  sol.kkt_residual = dso_kkt_residual(sub, sol.p_l, sol.p_s);
  sol.objective = dso_objective(sub, sol.p_l, sol.p_s);
  if (!r.converged || !(sol.kkt_residual <= eps.kkt)) {
    throw SolverError("solve_dso: no convergence after " + std::to_string(r.iterations) +
                          " iterations (KKT residual " + std::to_string(sol.kkt_residual) + ")",
                      sol.kkt_residual);
  }
  return sol;
}

}  // namespace evmpc
