#include "evmpc/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace evmpc {

double DualIterationState::max_residual() const {
  double worst = 0.0;
  for (double r : residual) worst = std::max(worst, std::abs(r));
  return worst;
}

PriceVector update_price(const PriceVector& lambda, std::span<const double> residual, double gamma) {
  if (residual.size() != lambda.size()) throw std::invalid_argument("update_price: length mismatch");
  std::vector<double> next(lambda.size());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::max(lambda[i] - gamma * residual[i], 0.0);
  return PriceVector(std::move(next));
}

namespace {

void solve_evs(const PriceVector& lambda, const Market& market, const Tolerances& eps, int threads,
               std::vector<EVSolution>& out) {
  const std::size_t count = market.evs.size();
  const int t = market.window.t();
  const double hours = market.window.slot_hours();
  auto solve_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      out[r] = solve_ev(make_ev_subproblem(market.evs[r], t, hours, lambda), eps);
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    solve_range(0, count);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          solve_range(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

DualIterationState evaluate_dual(const PriceVector& lambda, const Market& market, const Tolerances& eps,
                                 int threads, const DSOSolution* dso_warm_start) {
  const auto n = static_cast<std::size_t>(market.window.n());
  if (lambda.size() != n) throw std::invalid_argument("evaluate_dual: price vector length differs from window");

  DualIterationState s;
  s.lambda = lambda;
  s.ev_solutions.resize(market.evs.size());
  solve_evs(lambda, market, eps, threads, s.ev_solutions);

  s.demand.assign(n, 0.0);
  double value = 0.0;
  for (EVSolution& sol : s.ev_solutions) {
    sol.profile.resize(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) s.demand[i] += sol.profile[i];
    value += sol.objective;
  }

  const DSOSubproblem dso{market.dso, market.storage, market.x_now, market.window, lambda};
  s.dso_solution = solve_dso(dso, eps, DsoMethod::projected_newton, dso_warm_start);
  s.supply = s.dso_solution.p_l;
  value += s.dso_solution.objective;

  s.residual.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.residual[i] = s.supply[i] - s.demand[i];
  s.dual_value = value;
  return s;
}

NegotiationResult negotiate_slot(const Market& market, double warm_start_price, const ConvergenceConfig& config,
                                 const Tolerances& eps) {
  const auto n = static_cast<std::size_t>(market.window.n());
  PriceVector lambda = PriceVector::constant(n, warm_start_price);

  NegotiationResult out;
  if (market.evs.empty()) {
    // nothing to buy: generation sits at its floor and only the store moves
    Market idle = market;
    idle.dso.p_max = idle.dso.p_min;
    out.state = evaluate_dual(lambda, idle, eps, 1);
    out.residual = out.state.max_residual();
    out.converged = out.residual <= config.eps_balance;
    return out;
  }
  for (int k = 0;; ++k) {
    const DSOSolution* warm = k > 0 ? &out.state.dso_solution : nullptr;
    DualIterationState next = evaluate_dual(lambda, market, eps, config.threads, warm);
    out.state = std::move(next);
    out.state.k = k;
    out.iterations = k;
    out.residual = out.state.max_residual();
    if (out.residual <= config.eps_balance) {
      out.converged = true;
      return out;
    }
    if (k >= config.k_max) return out;

    const double step = config.step_schedule == StepSchedule::constant
                            ? config.gamma
                            : config.gamma / std::sqrt(static_cast<double>(k + 1));
    lambda = update_price(lambda, out.state.residual, step);
  }
}

double social_welfare(const Market& market, const std::vector<PowerProfile>& ev_profiles,
                      std::span<const double> p_s) {
  const auto n = static_cast<std::size_t>(market.window.n());
  std::vector<double> demand(n, 0.0);
  double value = 0.0;
  for (std::size_t r = 0; r < ev_profiles.size(); ++r) {
    const EVSession& ev = market.evs[r];
    const int stay = std::clamp(ev.departure - market.window.t(), 0, static_cast<int>(n));
    for (std::size_t i = 0; i < static_cast<std::size_t>(stay); ++i) {
      value += utility(ev_profiles[r][i], ev.weight, ev.utility_offset);
      demand[i] += ev_profiles[r][i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) value -= generation_cost(demand[i] - p_s[i], market.dso);
  value -= market.storage.rho *
           storage_tracking_penalty(market.x_now, p_s, market.storage, market.window.slot_hours());
  return value;
}

}  // namespace evmpc
