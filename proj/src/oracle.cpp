#include "evmpc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evmpc/dso_agent.hpp"
#include "evmpc/mpc_loop.hpp"

namespace evmpc {

void project_box_sum(std::span<double> y, double lo, double hi, double total) {
  if (y.empty()) return;
  auto sum_at = [&](double theta) {
    double s = 0.0;
    for (double v : y) s += std::clamp(v - theta, lo, hi);
    return s;
  };
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  double below = *ymin - hi;  // every entry at hi
  double above = *ymax - lo;  // every entry at lo
  for (int it = 0; it < 200 && above - below > 1e-15 * std::max(1.0, std::abs(above)); ++it) {
    const double mid = 0.5 * (below + above);
    if (sum_at(mid) > total) {
      below = mid;
    } else {
      above = mid;
    }
  }
  const double theta = 0.5 * (below + above);
  for (double& v : y) v = std::clamp(v - theta, lo, hi);
}

namespace {

struct Layout {
  struct Ev {
    std::size_t offset = 0;
    std::size_t stay = 0;
    double target_sum = 0.0;  // required sum of p over the stay
    bool fixed = false;       // infeasible, pinned at a bound
    double pinned = 0.0;
  };
  std::vector<Ev> evs;
  std::size_t ps_offset = 0;
  std::size_t size = 0;
  std::size_t n = 0;
  bool coupled = false;  // P_l box can bind
};

class CentralModel {
 public:
  CentralModel(const CentralProblem& p, const Tolerances& eps) : p_(p) {
    const std::size_t n = static_cast<std::size_t>(p.window.n());
    const double hours = p.window.slot_hours();
    lay_.n = n;
    std::size_t offset = 0;
    for (const EVSession& ev : p.evs) {
      Layout::Ev e;
      e.stay = static_cast<std::size_t>(std::clamp(ev.departure - p.window.t(), 0, static_cast<int>(n)));
      const double per_kw = ev.energy_per_kw(hours);
      const double e_max = per_kw * ev.p_max * static_cast<double>(e.stay);
      const double e_min = per_kw * ev.p_min * static_cast<double>(e.stay);
      if (ev.energy > e_max + eps.energy || ev.energy < e_min - eps.energy) {
        e.fixed = true;
        e.pinned = ev.energy > e_max ? ev.p_max : ev.p_min;
        infeasible_.push_back(ev.id);
      } else {
        e.offset = offset;
        e.target_sum = std::clamp(ev.energy / per_kw, ev.p_min * static_cast<double>(e.stay),
                                  ev.p_max * static_cast<double>(e.stay));
        offset += e.stay;
      }
      lay_.evs.push_back(e);
    }
    lay_.ps_offset = offset;
    lay_.size = offset + n;

    for (std::size_t i = 0; i < n; ++i) {
      double hi = 0.0;
      double lo = 0.0;
      for (std::size_t r = 0; r < p.evs.size(); ++r) {
        const auto& e = lay_.evs[r];
        if (i >= e.stay) continue;
        hi += e.fixed ? e.pinned : p.evs[r].p_max;
        lo += e.fixed ? e.pinned : p.evs[r].p_min;
      }
      if (hi > p.dso.p_max || lo < p.dso.p_min) lay_.coupled = true;
    }

    // Lipschitz bound on the gradient of the negated welfare.
    double curvature = 0.0;
    for (const EVSession& ev : p.evs) {
      curvature = std::max(curvature, ev.weight / ((ev.utility_offset + ev.p_min) * (ev.utility_offset + ev.p_min)));
    }
    const double k = p.storage.delta_s * hours;
    const double nn = static_cast<double>(n);
    lipschitz_ = curvature + 2.0 * p.dso.a * (static_cast<double>(p.evs.size()) + 1.0) +
                 p.storage.rho * k * k * nn * (nn + 1.0);
  }

  const Layout& layout() const { return lay_; }
  double lipschitz() const { return lipschitz_; }
  const std::vector<std::string>& infeasible() const { return infeasible_; }

  std::vector<PowerProfile> profiles(const std::vector<double>& z) const {
    std::vector<PowerProfile> out(p_.evs.size(), PowerProfile(lay_.n, 0.0));
    for (std::size_t r = 0; r < p_.evs.size(); ++r) {
      const auto& e = lay_.evs[r];
      for (std::size_t i = 0; i < e.stay; ++i) out[r][i] = e.fixed ? e.pinned : z[e.offset + i];
    }
    return out;
  }

  std::vector<double> demand(const std::vector<double>& z) const {
    std::vector<double> d(lay_.n, 0.0);
    for (std::size_t r = 0; r < p_.evs.size(); ++r) {
      const auto& e = lay_.evs[r];
      for (std::size_t i = 0; i < e.stay; ++i) d[i] += e.fixed ? e.pinned : z[e.offset + i];
    }
    return d;
  }

  std::span<const double> storage(const std::vector<double>& z) const {
    return std::span<const double>(z).subspan(lay_.ps_offset, lay_.n);
  }

  double welfare(const std::vector<double>& z) const { return social_welfare(p_, profiles(z), storage(z)); }

  void gradient(const std::vector<double>& z, std::vector<double>& g) const {
    const std::size_t n = lay_.n;
    const std::vector<double> d = demand(z);
    const auto ps = storage(z);
    std::vector<double> marginal(n);
    for (std::size_t i = 0; i < n; ++i) marginal[i] = 2.0 * p_.dso.a * (d[i] - ps[i]) + p_.dso.b;

    g.assign(lay_.size, 0.0);
    for (std::size_t r = 0; r < p_.evs.size(); ++r) {
      const auto& e = lay_.evs[r];
      if (e.fixed) continue;
      const EVSession& ev = p_.evs[r];
      for (std::size_t i = 0; i < e.stay; ++i) {
        // extrapolated points may leave the box; the utility is only defined above -offset
        const double p = std::max(z[e.offset + i], ev.p_min);
        g[e.offset + i] = ev.weight / (ev.utility_offset + p) - marginal[i];
      }
    }

    const double k = p_.storage.delta_s * p_.window.slot_hours();
    double stored = p_.x_now;
    std::vector<double> dev(n);
    for (std::size_t j = 0; j < n; ++j) {
      stored -= ps[j] * k;
      dev[j] = stored - p_.storage.x_ref;
    }
    double tail = 0.0;
    for (std::size_t j = n; j-- > 0;) {
      tail += dev[j];
      g[lay_.ps_offset + j] = marginal[j] + 2.0 * p_.storage.rho * k * tail;
    }
  }

  void project(std::vector<double>& z) const {
    for (std::size_t j = 0; j < lay_.n; ++j) {
      z[lay_.ps_offset + j] = std::clamp(z[lay_.ps_offset + j], p_.storage.ps_min, p_.storage.ps_max);
    }
    if (!lay_.coupled) {
      project_sessions(z);
      return;
    }
    // Dykstra between the per-session sets and the slot-sum box.
    std::vector<double> x = z;
    std::vector<double> inc_a(lay_.size, 0.0);
    std::vector<double> inc_b(lay_.size, 0.0);
    std::vector<double> u(lay_.size);
    std::vector<double> w(lay_.size);
    for (int it = 0; it < 20000; ++it) {
      for (std::size_t i = 0; i < lay_.size; ++i) u[i] = x[i] + inc_a[i];
      project_sessions(u);
      for (std::size_t i = 0; i < lay_.ps_offset; ++i) inc_a[i] += x[i] - u[i];
      for (std::size_t i = 0; i < lay_.size; ++i) w[i] = u[i] + inc_b[i];
      project_slot_sums(w);
      double change = 0.0;
      for (std::size_t i = 0; i < lay_.ps_offset; ++i) {
        inc_b[i] += u[i] - w[i];
        change = std::max(change, std::abs(w[i] - x[i]));
        x[i] = w[i];
      }
      if (change <= 1e-12) break;
    }
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(lay_.ps_offset), z.begin());
  }

 private:
  void project_sessions(std::vector<double>& z) const {
    for (std::size_t r = 0; r < p_.evs.size(); ++r) {
      const auto& e = lay_.evs[r];
      if (e.fixed || e.stay == 0) continue;
      project_box_sum(std::span<double>(z).subspan(e.offset, e.stay), p_.evs[r].p_min, p_.evs[r].p_max,
                      e.target_sum);
    }
  }

  void project_slot_sums(std::vector<double>& z) const {
    for (std::size_t i = 0; i < lay_.n; ++i) {
      double total = 0.0;
      std::size_t movable = 0;
      for (std::size_t r = 0; r < p_.evs.size(); ++r) {
        const auto& e = lay_.evs[r];
        if (i >= e.stay) continue;
        if (e.fixed) {
          total += e.pinned;
        } else {
          total += z[e.offset + i];
          ++movable;
        }
      }
      if (movable == 0) continue;
      double shift = 0.0;
      if (total > p_.dso.p_max) shift = (p_.dso.p_max - total) / static_cast<double>(movable);
      if (total < p_.dso.p_min) shift = (p_.dso.p_min - total) / static_cast<double>(movable);
      if (shift == 0.0) continue;
      for (std::size_t r = 0; r < p_.evs.size(); ++r) {
        const auto& e = lay_.evs[r];
        if (i < e.stay && !e.fixed) z[e.offset + i] += shift;
      }
    }
  }

  const CentralProblem& p_;
  Layout lay_;
  double lipschitz_ = 1.0;
  std::vector<std::string> infeasible_;
};

}  // namespace

CentralSolution solve_central(const CentralProblem& problem, const Tolerances& eps, OracleCap cap,
                              int max_iterations) {
  if (problem.window.n() > cap.max_slots || static_cast<int>(problem.evs.size()) > cap.max_evs) {
    throw std::invalid_argument("solve_central: instance exceeds the oracle cap (" +
                                std::to_string(cap.max_slots) + " slots, " + std::to_string(cap.max_evs) +
                                " vehicles)");
  }
  const CentralModel model(problem, eps);
  const Layout& lay = model.layout();
  const double step = 1.0 / model.lipschitz();

  std::vector<double> x(lay.size, 0.0);
  model.project(x);
  std::vector<double> y = x;
  std::vector<double> next(lay.size);
  std::vector<double> g;
  double fx = model.welfare(x);
  double momentum = 1.0;

  CentralSolution out;
  for (int it = 0; it < max_iterations; ++it) {
    model.gradient(y, g);
    for (std::size_t i = 0; i < lay.size; ++i) next[i] = y[i] + step * g[i];
    model.project(next);

    double mapping = 0.0;
    for (std::size_t i = 0; i < lay.size; ++i) mapping = std::max(mapping, std::abs(next[i] - y[i]));
    mapping /= step;
    out.iterations = it + 1;
    out.stationarity = mapping;

    const double fnext = model.welfare(next);
    if (mapping <= eps.kkt) {
      x = next;
      out.converged = true;
      break;
    }
    if (fnext < fx) {
      // restart the momentum when the welfare drops
      momentum = 1.0;
      y = x;
      continue;
    }
    const double following = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double beta = (momentum - 1.0) / following;
    for (std::size_t i = 0; i < lay.size; ++i) y[i] = next[i] + beta * (next[i] - x[i]);
    x = next;
    fx = fnext;
    momentum = following;
  }

  out.ev_profiles = model.profiles(x);
  out.p_l = model.demand(x);
  const auto ps = model.storage(x);
  out.p_s.assign(ps.begin(), ps.end());
  out.welfare = model.welfare(x);
  out.infeasible = model.infeasible();
  return out;
}

Market truncate_for_oracle(const Scenario& scenario, OracleCap cap) {
  std::vector<EVSession> sessions = scenario_sessions(scenario);
  std::stable_sort(sessions.begin(), sessions.end(),
                   [](const EVSession& a, const EVSession& b) { return a.arrival < b.arrival; });

  const double hours = scenario.grid.slot_hours();
  Market m;
  for (const EVSession& src : sessions) {
    if (static_cast<int>(m.evs.size()) >= cap.max_evs) break;
    const int stay = std::min(src.departure - src.arrival, cap.max_slots);
    if (stay < 1) continue;
    EVSession ev = src;
    ev.arrival = 0;
    ev.departure = stay;
    const double per_kw = ev.energy_per_kw(hours);
    ev.energy = std::clamp(ev.energy, per_kw * ev.p_min * stay, per_kw * ev.p_max * stay);
    m.evs.push_back(std::move(ev));
  }
  m.window = compute_window(m.evs, 0, hours);
  m.dso = scenario.dso;
  m.storage = scenario.effective_storage();
  m.x_now = m.storage.x0;
  return m;
}

VerifyReport verify_market(const Market& market, const Scenario& scenario, OracleCap cap) {
  const double hours = market.window.slot_hours();
  ConvergenceConfig config = scenario.solver;
  config.gamma = to_internal_price(config.gamma, hours);
  const NegotiationResult neg =
      negotiate_slot(market, to_internal_price(scenario.initial_price, hours), config, scenario.tolerances);

  std::vector<PowerProfile> plans;
  plans.reserve(neg.state.ev_solutions.size());
  for (const EVSolution& s : neg.state.ev_solutions) plans.push_back(s.profile);

  VerifyReport r;
  r.decentralized_welfare = social_welfare(market, plans, neg.state.dso_solution.p_s);
  r.max_residual = neg.residual;
  r.iterations = neg.iterations;
  r.negotiation_converged = neg.converged;

  const CentralSolution central = solve_central(market, scenario.tolerances, cap);
  r.oracle_welfare = central.welfare;
  r.oracle_converged = central.converged;
  r.relative_gap = std::abs(r.oracle_welfare - r.decentralized_welfare) / std::max(std::abs(r.oracle_welfare), 1e-12);
  r.evs = static_cast<int>(market.evs.size());
  r.slots = market.window.n();
  return r;
}

VerifyReport verify_against_oracle(const Scenario& scenario, OracleCap cap) {
  return verify_market(truncate_for_oracle(scenario, cap), scenario, cap);
}

}  // namespace evmpc
