#include "evmpc/mpc_loop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evmpc/scenario_io.hpp"

namespace evmpc {

std::vector<EVSession> scenario_sessions(const Scenario& scenario) {
  std::vector<EVSession> sessions = scenario.evs;
  const auto generated =
      generate_evs(scenario.generate.count, scenario.grid, scenario.generate, scenario.seed);
  sessions.insert(sessions.end(), generated.begin(), generated.end());
  return sessions;
}

TimeGrid compute_window(std::span<const EVSession> active, int t, double slot_hours) {
  int n = 1;
  for (const EVSession& ev : active) n = std::max(n, ev.departure - t);
  return TimeGrid(t, n, slot_hours);
}

SimulationState initial_state(const Scenario& scenario, const std::vector<EVSession>& sessions) {
  SimulationState s;
  s.x_s = scenario.effective_storage().x0;
  s.last_price = scenario.initial_price;

  std::vector<EVSession> ordered = sessions;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const EVSession& a, const EVSession& b) { return a.arrival < b.arrival; });
  s.pending.assign(ordered.begin(), ordered.end());

  s.outcomes.reserve(sessions.size());
  for (const EVSession& ev : sessions) {
    s.outcomes.push_back(EvOutcome{ev.id, ev.arrival, ev.departure, ev.energy, ev.energy, 0.0});
  }
  return s;
}

namespace {

EvOutcome& outcome_for(SimulationState& state, const std::string& id) {
  auto it = std::find_if(state.outcomes.begin(), state.outcomes.end(),
                         [&](const EvOutcome& o) { return o.id == id; });
  if (it == state.outcomes.end()) throw std::logic_error("no outcome slot for session " + id);
  return *it;
}

// Moves arrivals into the active set; sessions already over on arrival are closed at once.
void admit(SimulationState& state, double eps_energy) {
  while (!state.pending.empty() && state.pending.front().arrival <= state.t) {
    EVSession ev = std::move(state.pending.front());
    state.pending.pop_front();
    if (ev.departure <= state.t || ev.energy <= eps_energy) {
      outcome_for(state, ev.id).final_energy = ev.energy;
      continue;
    }
    state.active.push_back(std::move(ev));
  }
}

// Closes sessions that are complete or whose departure is the next slot boundary.
void retire(SimulationState& state, double eps_energy) {
  const int next = state.t + 1;
  std::erase_if(state.active, [&](const EVSession& ev) {
    if (ev.energy <= eps_energy || ev.departure <= next) {
      outcome_for(state, ev.id).final_energy = ev.energy;
      return true;
    }
    return false;
  });
}

// Applies `power` to a vehicle for one slot, never taking its SOC error below zero.
double apply_power(SimulationState& state, EVSession& ev, double power, double slot_hours) {
  const double per_kw = ev.energy_per_kw(slot_hours);
  power = std::clamp(power, 0.0, ev.energy / per_kw);
  const double stored = per_kw * power;
  ev.energy = std::max(0.0, ev.energy - stored);
  outcome_for(state, ev.id).delivered += stored;
  return power;
}

void close_remaining(SimulationState& state) {
  for (const EVSession& ev : state.active) outcome_for(state, ev.id).final_energy = ev.energy;
  for (const EVSession& ev : state.pending) outcome_for(state, ev.id).final_energy = ev.energy;
  state.active.clear();
  state.pending.clear();
}

}  // namespace

SlotRecord step(SimulationState& state, const Scenario& scenario) {
  const double hours = scenario.grid.slot_hours();
  const Tolerances& eps = scenario.tolerances;
  admit(state, eps.energy);

  Market market;
  market.window = compute_window(state.active, state.t, hours);
  market.evs = state.active;
  market.dso = scenario.dso;
  market.storage = scenario.effective_storage();
  market.x_now = state.x_s;

  ConvergenceConfig config = scenario.solver;
  config.gamma = to_internal_price(config.gamma, hours);
  const NegotiationResult neg = negotiate_slot(market, to_internal_price(state.last_price, hours), config, eps);

  SlotRecord rec;
  rec.slot = state.t;
  rec.price_applied = to_user_price(neg.state.lambda[0], hours);
  rec.p_l = neg.state.supply[0];
  rec.p_s = neg.state.dso_solution.p_s[0];
  rec.iterations = neg.iterations;
  rec.residual = neg.residual;
  rec.converged = neg.converged;

  for (std::size_t r = 0; r < state.active.size(); ++r) {
    EVSession& ev = state.active[r];
    const double p = apply_power(state, ev, neg.state.ev_solutions[r].profile[0], hours);
    rec.demand_total += p;
    rec.per_ev.push_back(EvSlotState{ev.id, p, ev.energy});
  }

  state.x_s -= rec.p_s * market.storage.delta_s * hours;
  rec.x_s = state.x_s;
  state.last_price = rec.price_applied;

  retire(state, eps.energy);
  state.trace.push_back(rec);
  ++state.t;
  return rec;
}

SimulationTrace run(const Scenario& scenario) {
  const std::vector<EVSession> sessions = scenario_sessions(scenario);
  SimulationState state = initial_state(scenario, sessions);
  while (state.t < scenario.grid.num_slots) step(state, scenario);
  close_remaining(state);

  SimulationTrace trace;
  trace.slot_hours = scenario.grid.slot_hours();
  trace.slots = std::move(state.trace);
  trace.evs = std::move(state.outcomes);
  trace.summary = summarize(trace.slots, trace.evs, trace.slot_hours);
  return trace;
}

SimulationTrace simulate_uncontrolled(const Scenario& scenario) {
  const double hours = scenario.grid.slot_hours();
  const double eps_energy = scenario.tolerances.energy;
  const std::vector<EVSession> sessions = scenario_sessions(scenario);
  SimulationState state = initial_state(scenario, sessions);

  while (state.t < scenario.grid.num_slots) {
    admit(state, eps_energy);
    SlotRecord rec;
    rec.slot = state.t;
    for (EVSession& ev : state.active) {
      const double p = apply_power(state, ev, ev.p_max, hours);
      rec.demand_total += p;
      rec.per_ev.push_back(EvSlotState{ev.id, p, ev.energy});
    }
    rec.p_l = rec.demand_total;
    rec.x_s = state.x_s;
    // no market: report the marginal generation cost of serving the demand
    const double marginal = 2.0 * scenario.dso.a * rec.demand_total + scenario.dso.b;
    rec.price_applied = to_user_price(marginal, hours);
    retire(state, eps_energy);
    state.trace.push_back(std::move(rec));
    ++state.t;
  }
  close_remaining(state);

  SimulationTrace trace;
  trace.slot_hours = hours;
  trace.slots = std::move(state.trace);
  trace.evs = std::move(state.outcomes);
  trace.summary = summarize(trace.slots, trace.evs, hours);
  return trace;
}

TraceSummary summarize(const std::vector<SlotRecord>& slots, const std::vector<EvOutcome>& evs,
                       double slot_hours) {
  TraceSummary s;
  if (!slots.empty()) {
    double sum = 0.0;
    for (const SlotRecord& r : slots) sum += r.price_applied;
    s.price_mean = sum / static_cast<double>(slots.size());
    double sq = 0.0;
    for (const SlotRecord& r : slots) sq += (r.price_applied - s.price_mean) * (r.price_applied - s.price_mean);
    s.price_stdev = std::sqrt(sq / static_cast<double>(slots.size()));
  }
  for (const SlotRecord& r : slots) {
    s.peak_demand = std::max(s.peak_demand, r.demand_total);
    s.total_energy += r.demand_total * slot_hours;
    s.max_iterations = std::max(s.max_iterations, r.iterations);
    if (!r.converged) ++s.nonconverged_slots;
  }
  for (const EvOutcome& o : evs) s.unmet_energy += o.final_energy;
  return s;
}

}  // namespace evmpc
