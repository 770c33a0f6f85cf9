#include "evmpc/ev_agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evmpc {

double utility(double p, double weight, double offset) {
  if (p < 0.0) throw std::domain_error("utility: negative power");
  return weight * std::log(offset + p);
}

EVSubproblem make_ev_subproblem(const EVSession& session, int t, double slot_hours,
                                const PriceVector& window_prices) {
  const int remaining = std::max(0, session.departure - t);
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(remaining), window_prices.size());
  return EVSubproblem{session, t, slot_hours, window_prices.head(n)};
}

double delivered_energy(const EVSession& session, std::span<const double> profile, double slot_hours) {
  double total = 0.0;
  for (double p : profile) total += p;
  return session.energy_per_kw(slot_hours) * total;
}

double ev_objective(const EVSubproblem& sub, std::span<const double> profile) {
  const EVSession& ev = sub.session;
  double value = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    value += ev.weight * std::log(ev.utility_offset + profile[i]) - sub.prices[i] * profile[i];
  }
  return value;
}

namespace {

// Maximizer of w ln(c + p) - d p over [p_min, p_max], where d = lambda + nu.
double best_response(const EVSession& ev, double d) {
  if (d <= ev.weight / (ev.utility_offset + ev.p_max)) return ev.p_max;
  return std::clamp(ev.weight / d - ev.utility_offset, ev.p_min, ev.p_max);
}

}  // namespace

EVSolution solve_ev(const EVSubproblem& sub, const Tolerances& eps) {
  const EVSession& ev = sub.session;
  const std::size_t n = sub.slots();
  const auto lambda = sub.prices.values();
  const double per_kw = ev.energy_per_kw(sub.slot_hours);

  EVSolution sol;
  if (n == 0) {
    sol.feasible = ev.energy <= eps.energy;
    return sol;
  }

  const auto [lam_min, lam_max] = std::minmax_element(lambda.begin(), lambda.end());
  // Every slot sits at p_max for nu <= nu_all_max and at p_min for nu >= nu_all_min.
  double nu_all_max = ev.weight / (ev.utility_offset + ev.p_max) - *lam_max;
  double nu_all_min = ev.weight / (ev.utility_offset + ev.p_min) - *lam_min;

  const double e_min = per_kw * ev.p_min * static_cast<double>(n);
  const double e_max = per_kw * ev.p_max * static_cast<double>(n);

  auto finish = [&](double nu) {
    sol.mu = nu / per_kw;
    sol.objective = ev_objective(sub, sol.profile);
    return sol;
  };

  if (ev.energy >= e_max - eps.energy) {
    sol.profile.assign(n, ev.p_max);
    sol.feasible = ev.energy <= e_max + eps.energy;
    return finish(nu_all_max);
  }
  if (ev.energy <= e_min + eps.energy) {
    sol.profile.assign(n, ev.p_min);
    sol.feasible = ev.energy >= e_min - eps.energy;
    return finish(nu_all_min);
  }

  auto plan = [&](double nu, PowerProfile& out) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = best_response(ev, lambda[i] + nu);
      total += out[i];
    }
    return per_kw * total;
  };

  sol.profile.resize(n);
  double nu = 0.5 * (nu_all_max + nu_all_min);
  for (int it = 0; it < eps.max_bisection; ++it) {
    nu = 0.5 * (nu_all_max + nu_all_min);
    const double excess = plan(nu, sol.profile) - ev.energy;
    if (std::abs(excess) <= eps.energy) break;
    // delivered energy is nonincreasing in nu
    if (excess > 0.0) {
      nu_all_max = nu;
    } else {
      nu_all_min = nu;
    }
  }
  plan(nu, sol.profile);
  sol.feasible = true;
  return finish(nu);
}

double ev_kkt_residual(const EVSubproblem& sub, const EVSolution& sol) {
  const EVSession& ev = sub.session;
  const double nu = sol.mu * ev.energy_per_kw(sub.slot_hours);
  const double slack = 1e-12 * std::max(1.0, ev.p_max);
  double worst = 0.0;
  for (std::size_t i = 0; i < sol.profile.size(); ++i) {
    const double p = sol.profile[i];
    if (p < ev.p_min - slack || p > ev.p_max + slack) return std::numeric_limits<double>::infinity();
    if (ev.p_max - ev.p_min <= slack) continue;
    const double grad = ev.weight / (ev.utility_offset + p) - sub.prices[i] - nu;
    double violation = 0.0;
    if (p >= ev.p_max - slack) {
      violation = std::max(0.0, -grad);
    } else if (p <= ev.p_min + slack) {
      violation = std::max(0.0, grad);
    } else {
      violation = std::abs(grad);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace evmpc
