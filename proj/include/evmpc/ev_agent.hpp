// Single-vehicle charging subproblem at fixed prices.
//
//   maximize   sum_tau  w ln(c + p(tau)) - lambda(tau) p(tau)
//   subject to p_min <= p(tau) <= p_max
//              sum_tau (1 - xi) T_c p(tau) = e
//
// The SOC recursion e(tau+1) = e(tau) - (1 - xi) T_c p(tau) with e(t) = e and
// e(t_f) = 0 telescopes to the single energy equality above. With nu the
// multiplier of that equality scaled by (1 - xi) T_c, stationarity gives the
// water-filling form p(tau) = clamp(w / (lambda(tau) + nu) - c, p_min, p_max),
// and nu is found by bisection on the delivered energy.

#pragma once

#include "evmpc/model.hpp"

namespace evmpc {

/// w * ln(offset + p). Throws std::domain_error for p < 0.
double utility(double p, double weight, double offset = 1.0);

/// The session's remaining stay [t, departure) may be empty, so the window is
/// carried as a start slot plus the price vector length rather than a TimeGrid.
struct EVSubproblem {
  EVSession session;
  int t = 0;
  double slot_hours = 0.25;
  PriceVector prices;  // internal units, one entry per remaining slot

  std::size_t slots() const { return prices.size(); }
};

/// Builds the subproblem for `session` at slot `t`, restricting the
/// coordinator's window prices to the session's remaining stay.
EVSubproblem make_ev_subproblem(const EVSession& session, int t, double slot_hours,
                                const PriceVector& window_prices);

struct EVSolution {
  PowerProfile profile;
  double mu = 0.0;  // energy-constraint multiplier, internal price per kWh
  double objective = 0.0;
  bool feasible = true;
};

EVSolution solve_ev(const EVSubproblem& sub, const Tolerances& eps);

/// Energy stored by `profile`: sum (1 - xi) T_c p.
double delivered_energy(const EVSession& session, std::span<const double> profile, double slot_hours);

/// Objective sum w ln(c + p) - lambda p of an arbitrary profile.
double ev_objective(const EVSubproblem& sub, std::span<const double> profile);

/// Largest KKT violation of `sol`: stationarity on interior slots, sign of the
/// bound multiplier on saturated slots. Infinite when the profile leaves the box.
double ev_kkt_residual(const EVSubproblem& sub, const EVSolution& sol);

}  // namespace evmpc
