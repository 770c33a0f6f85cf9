// Centralized welfare maximization on small instances, used as ground truth
// for the decentralized price negotiation.
//
//   maximize  sum_r sum_tau U_r(p_r) - sum_tau C(P_l - P_s) - rho * tracking(P_s)
//   s.t.      P_l(tau) = sum_r p_r(tau)            (substituted)
//             box bounds on p_r, P_l, P_s and every EV's terminal energy equality
//
// Solved in the primal with accelerated projected gradient. The feasible set of
// each vehicle is a box cut by one hyperplane, projected onto by bisection on
// the hyperplane multiplier; the slot-wise P_l box is handled with Dykstra's
// alternating projections when it can bind.

#pragma once

#include <string>
#include <vector>

#include "evmpc/coordinator.hpp"
#include "evmpc/model.hpp"

namespace evmpc {

struct OracleCap {
  int max_slots = 6;
  int max_evs = 4;
};

using CentralProblem = Market;

struct CentralSolution {
  std::vector<PowerProfile> ev_profiles;  // window length, zero past departure
  PowerProfile p_l;
  PowerProfile p_s;
  double welfare = 0.0;
  double stationarity = 0.0;  // infinity norm of the gradient mapping at the returned point
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> infeasible;  // sessions that cannot meet their energy, pinned at a bound
};

/// Throws std::invalid_argument when the instance exceeds `cap`.
CentralSolution solve_central(const CentralProblem& problem, const Tolerances& eps, OracleCap cap = {},
                              int max_iterations = 200000);

/// Euclidean projection of `y` onto {lo <= p <= hi, sum p = total}; `total`
/// must lie in [n lo, n hi].
void project_box_sum(std::span<double> y, double lo, double hi, double total);

/// Builds the oracle-sized market from a scenario: the first cap.max_evs
/// sessions by arrival, all shifted to start at slot 0, stays cut to
/// cap.max_slots and energies cut to what the shortened stay can deliver.
Market truncate_for_oracle(const Scenario& scenario, OracleCap cap);

struct VerifyReport {
  double decentralized_welfare = 0.0;
  double oracle_welfare = 0.0;
  double relative_gap = 0.0;
  double max_residual = 0.0;  // final balance residual of the negotiation, kW
  int iterations = 0;
  bool negotiation_converged = false;
  bool oracle_converged = false;
  int evs = 0;
  int slots = 0;
};

/// Negotiates the market with the scenario's solver settings and compares the
/// welfare of the resulting plan with the oracle's.
VerifyReport verify_market(const Market& market, const Scenario& scenario, OracleCap cap = {});

VerifyReport verify_against_oracle(const Scenario& scenario, OracleCap cap = {});

}  // namespace evmpc
