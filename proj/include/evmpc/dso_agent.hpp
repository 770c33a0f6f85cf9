// Generation + storage subproblem of the DSO at fixed prices:
//
//   maximize  sum_tau [ lambda P_l - C(P_l - P_s) ]  -  rho * tracking(P_s)
//   over      P_l in [P_min, P_max]^N,  P_s in [Ps_min, Ps_max]^N
//
// with C(q) = a q^2 + b q and
//   tracking(P_s) = sum_{j=t}^{t+N-1} (x_now - sum_{i=t}^{j} P_s(i) delta_s T_c - x_ref)^2.
// The objective is strictly concave for a > 0, so the maximizer is unique.

#pragma once

#include <optional>
#include <span>
#include <stdexcept>

#include "evmpc/model.hpp"

namespace evmpc {

struct DSOSubproblem {
  DSOSpec dso;
  StorageSpec storage;
  double x_now = 0.0;
  TimeGrid window;
  PriceVector prices;  // internal units
};

struct DSOSolution {
  PowerProfile p_l;
  PowerProfile p_s;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

enum class DsoMethod {
  projected_newton,    // active-set Newton, the production path
  projected_gradient,  // fixed step 1/L, kept as an independent reference
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

double generation_cost(double q, const DSOSpec& dso);

/// Unweighted tracking sum; the DSO objective scales it by storage.rho.
double storage_tracking_penalty(double x_now, std::span<const double> p_s, const StorageSpec& storage,
                                double slot_hours);

double dso_objective(const DSOSubproblem& sub, std::span<const double> p_l, std::span<const double> p_s);

/// Projected-stationarity violation: |gradient| on interior coordinates, the
/// inward component of the gradient on coordinates at a bound.
double dso_kkt_residual(const DSOSubproblem& sub, std::span<const double> p_l, std::span<const double> p_s);

/// Throws SolverError when the iteration cap is reached before eps.kkt.
DSOSolution solve_dso(const DSOSubproblem& sub, const Tolerances& eps,
                      DsoMethod method = DsoMethod::projected_newton,
                      const DSOSolution* warm_start = nullptr);

}  // namespace evmpc
