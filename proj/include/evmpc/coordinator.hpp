// Dual price coordination for one slot.
//
// The coordinator broadcasts a window price vector, every agent answers with its
// own power curve, and the prices move along the projected anti-gradient of the
// dual function D. The gradient of D is the balance violation supply - demand.
// All prices here are internal (per kW held for one slot).

#pragma once

#include <vector>

#include "evmpc/dso_agent.hpp"
#include "evmpc/ev_agent.hpp"
#include "evmpc/model.hpp"

namespace evmpc {

struct DualIterationState {
  int k = 0;
  PriceVector lambda;
  PowerProfile demand;    // sum of EV curves, zero-padded past each departure
  PowerProfile supply;    // P_l
  PowerProfile residual;  // supply - demand
  double dual_value = 0.0;
  std::vector<EVSolution> ev_solutions;  // in Market::evs order, window length
  DSOSolution dso_solution;

  double max_residual() const;
};

/// max(lambda - gamma * residual, 0) elementwise.
PriceVector update_price(const PriceVector& lambda, std::span<const double> residual, double gamma);

/// Solves every agent at `lambda` and assembles D(lambda) as the sum of the
/// agents' optimal objectives. `threads` > 1 fans the EV solves out.
DualIterationState evaluate_dual(const PriceVector& lambda, const Market& market, const Tolerances& eps,
                                 int threads = 1, const DSOSolution* dso_warm_start = nullptr);

struct NegotiationResult {
  DualIterationState state;  // agents solved at the final price vector
  int iterations = 0;        // price updates performed
  double residual = 0.0;     // max |supply - demand|, kW
  bool converged = false;
};

/// Iterates evaluate_dual / update_price from a flat warm-start price until the
/// max-norm balance residual drops to eps_balance or k_max updates were made.
/// `gamma` in `config` must already be in internal units.
NegotiationResult negotiate_slot(const Market& market, double warm_start_price, const ConvergenceConfig& config,
                                 const Tolerances& eps);

/// Social welfare sum U - sum C(P_l - P_s) - rho * tracking for given curves.
/// `ev_profiles` are window length; P_l is taken as the EV demand so the
/// balance constraint holds by construction.
double social_welfare(const Market& market, const std::vector<PowerProfile>& ev_profiles,
                      std::span<const double> p_s);

}  // namespace evmpc
