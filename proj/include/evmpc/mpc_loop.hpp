// Receding-horizon driver. Each slot it admits arrivals, sizes the window to
// the latest departure among the active vehicles, negotiates prices over that
// window, applies only the first sample of every negotiated curve and rolls
// the vehicle and storage states forward by one slot.

#pragma once

#include <deque>
#include <string>
#include <vector>

#include "evmpc/coordinator.hpp"
#include "evmpc/model.hpp"

namespace evmpc {

struct EvOutcome {
  std::string id;
  int arrival = 0;
  int departure = 0;
  double initial_energy = 0.0;
  double final_energy = 0.0;  // SOC error left when the session ended
  double delivered = 0.0;     // energy stored, sum (1 - xi) T_c p
};

struct TraceSummary {
  double price_mean = 0.0;
  double price_stdev = 0.0;
  double peak_demand = 0.0;
  double total_energy = 0.0;  // energy drawn by the chargers, kWh
  double unmet_energy = 0.0;  // SOC error left across all sessions, kWh
  int max_iterations = 0;
  int nonconverged_slots = 0;
};

struct SimulationTrace {
  double slot_hours = 0.25;
  std::vector<SlotRecord> slots;
  std::vector<EvOutcome> evs;  // in session order
  TraceSummary summary;
};

struct SimulationState {
  int t = 0;
  std::vector<EVSession> active;
  std::deque<EVSession> pending;  // sorted by arrival
  double x_s = 0.0;
  double last_price = 0.0;  // euro cent/kWh, first entry of the previous slot's prices
  std::vector<SlotRecord> trace;
  std::vector<EvOutcome> outcomes;  // parallel to the session list handed to initial_state
};

/// Sessions of the scenario: the explicit list followed by the generated fleet.
std::vector<EVSession> scenario_sessions(const Scenario& scenario);

/// Window from `t` to the latest departure of the active vehicles; one slot
/// when nobody is active.
TimeGrid compute_window(std::span<const EVSession> active, int t, double slot_hours);

SimulationState initial_state(const Scenario& scenario, const std::vector<EVSession>& sessions);

/// Advances `state` by one slot and returns the applied record (also appended
/// to state.trace). A slot whose negotiation hit k_max is applied from the last
/// iterate and flagged converged = false.
SlotRecord step(SimulationState& state, const Scenario& scenario);

SimulationTrace run(const Scenario& scenario);

/// Baseline without any coordination: every active vehicle draws p_max, cut
/// back only so its SOC error does not go negative.
SimulationTrace simulate_uncontrolled(const Scenario& scenario);

TraceSummary summarize(const std::vector<SlotRecord>& slots, const std::vector<EvOutcome>& evs,
                       double slot_hours);

}  // namespace evmpc
