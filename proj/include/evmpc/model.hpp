// Domain types shared by the agents, the coordinator and the MPC driver.
//
// Units used throughout the library:
//   power            kW
//   energy           kWh
//   slot duration    hours (T_c)
//   user prices      euro cent per kWh (scenario files, traces)
//   internal prices  cost units per kW held for one slot; internal = user * T_c
//
// The internal price is what multiplies a power in the agent objectives, so the
// EV term is exactly lambda(tau) * p(tau) and the DSO revenue is lambda(tau) * P_l(tau).

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evmpc {

/// Per-slot power sequence over a control window, kW.
using PowerProfile = std::vector<double>;

/// Prediction window {t, t+1, ..., t+n-1} on a grid of `slot_hours` long slots.
class TimeGrid {
 public:
  TimeGrid(int t, int n, double slot_hours);

  int t() const { return t_; }
  int n() const { return n_; }
  double slot_hours() const { return slot_hours_; }
  int end() const { return t_ + n_; }
  bool contains(int slot) const { return slot >= t_ && slot < end(); }

  bool operator==(const TimeGrid&) const = default;

 private:
  int t_;
  int n_;
  double slot_hours_;
};

/// One vehicle's charging session. `energy` is the SOC error e: the energy
/// still to be absorbed before `departure`. The vehicle may charge in slots
/// arrival, ..., departure - 1.
struct EVSession {
  std::string id;
  int arrival = 0;
  int departure = 0;
  double p_min = 0.0;
  double p_max = 22.0;
  double weight = 10.0;
  double xi = 0.0;  // charging loss fraction
  double energy = 0.0;
  double utility_offset = 1.0;  // U(p) = weight * ln(offset + p)

  /// Energy actually stored per kW drawn for one slot: (1 - xi) * T_c.
  double energy_per_kw(double slot_hours) const { return (1.0 - xi) * slot_hours; }

  bool operator==(const EVSession&) const = default;
};

/// Generation cost C(q) = a q^2 + b q on the net generation q = P_l - P_s.
struct DSOSpec {
  double a = 0.06;
  double b = 0.9;
  double p_min = 0.0;
  double p_max = 100.0;

  bool operator==(const DSOSpec&) const = default;
};

/// Storage element. Positive power discharges toward generation and lowers the
/// stored energy by power * delta_s * T_c per slot.
struct StorageSpec {
  double ps_min = 0.0;
  double ps_max = 0.0;
  double x0 = 0.0;
  double x_ref = 0.0;
  double delta_s = 1.0;
  double rho = 1.0;  // weight on the reference-tracking sum

  bool enabled() const { return ps_min < ps_max; }

  bool operator==(const StorageSpec&) const = default;
};

/// Energy price over a window. Every entry is nonnegative.
class PriceVector {
 public:
  PriceVector() = default;
  explicit PriceVector(std::vector<double> values);

  static PriceVector constant(std::size_t n, double value);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// First `n` entries, used to restrict the window price to an EV's stay.
  PriceVector head(std::size_t n) const;

  bool operator==(const PriceVector&) const = default;

 private:
  std::vector<double> values_;
};

double to_internal_price(double cents_per_kwh, double slot_hours);
double to_user_price(double internal, double slot_hours);

struct Tolerances {
  double energy = 1e-6;  // kWh, terminal energy residual of an EV plan
  double kkt = 1e-6;     // projected stationarity of the agent solvers
  int max_bisection = 200;
  int max_dso_iterations = 100000;

  bool operator==(const Tolerances&) const = default;
};

enum class StepSchedule { constant, diminishing };

/// Dual price iteration settings. `gamma` is in euro cent/kWh per kW of
/// imbalance; the coordinator works with gamma * T_c on internal prices.
struct ConvergenceConfig {
  double gamma = 0.005;
  double eps_balance = 0.1;
  int k_max = 2000;
  StepSchedule step_schedule = StepSchedule::constant;
  int threads = 1;

  bool operator==(const ConvergenceConfig&) const = default;
};

/// Agents present at one slot, without prices. Used both by the dual
/// coordinator and by the centralized welfare oracle.
struct Market {
  TimeGrid window{0, 1, 0.25};
  std::vector<EVSession> evs;
  DSOSpec dso;
  StorageSpec storage;
  double x_now = 0.0;
};

/// Applied outcome for one vehicle in one slot.
struct EvSlotState {
  std::string id;
  double power = 0.0;
  double soc_error = 0.0;
};

struct SlotRecord {
  int slot = 0;
  double price_applied = 0.0;  // euro cent/kWh
  double demand_total = 0.0;
  double p_l = 0.0;
  double p_s = 0.0;
  double x_s = 0.0;
  std::vector<EvSlotState> per_ev;
  int iterations = 0;
  double residual = 0.0;  // max |supply - demand| over the window, kW
  bool converged = true;
};

struct GridConfig {
  double slot_minutes = 15.0;
  int num_slots = 48;

  double slot_hours() const { return slot_minutes / 60.0; }

  bool operator==(const GridConfig&) const = default;
};

/// Bounds for seeded random session generation.
struct FleetGenerator {
  int count = 0;
  double p_min = 0.0;
  double p_max = 22.0;
  double weight = 10.0;
  double xi = 0.0;
  double utility_offset = 1.0;
  double energy_min = 5.0;
  double energy_max = 40.0;

  bool operator==(const FleetGenerator&) const = default;
};

struct Scenario {
  GridConfig grid;
  DSOSpec dso;
  std::optional<StorageSpec> storage;
  std::vector<EVSession> evs;
  FleetGenerator generate;
  ConvergenceConfig solver;
  Tolerances tolerances;
  double initial_price = 16.0;  // euro cent/kWh
  std::uint64_t seed = 0;

  /// Storage in effect: an absent block means a zero-power, zero-energy store.
  StorageSpec effective_storage() const { return storage.value_or(StorageSpec{}); }

  bool operator==(const Scenario&) const = default;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Id given to the i-th (0-based) of `count` generated sessions: ev01, ev02, ...
std::string generated_id(int index, int count);

/// Collects every invariant violation in the scenario. Never throws.
ValidationReport validate_scenario(const Scenario& scenario);

/// Violations of a single session, with messages prefixed by the session id.
void validate_session(const EVSession& ev, std::vector<std::string>& out);

}  // namespace evmpc
