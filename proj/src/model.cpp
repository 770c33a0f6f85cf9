#include "evmpc/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace evmpc {

TimeGrid::TimeGrid(int t, int n, double slot_hours) : t_(t), n_(n), slot_hours_(slot_hours) {
  if (n < 1) throw std::invalid_argument("TimeGrid: window length must be at least 1");
  if (!(slot_hours > 0.0)) throw std::invalid_argument("TimeGrid: slot duration must be positive");
}

PriceVector::PriceVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("PriceVector: prices must be finite and nonnegative");
    }
  }
}

PriceVector PriceVector::constant(std::size_t n, double value) {
  return PriceVector(std::vector<double>(n, value));
}

PriceVector PriceVector::head(std::size_t n) const {
  if (n > values_.size()) throw std::out_of_range("PriceVector::head: longer than the window");
  return PriceVector(std::vector<double>(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(n)));
}

double to_internal_price(double cents_per_kwh, double slot_hours) { return cents_per_kwh * slot_hours; }
double to_user_price(double internal, double slot_hours) { return internal / slot_hours; }

namespace {

template <typename T>
std::string str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string generated_id(int index, int count) {
  const int width = std::max(2, static_cast<int>(std::to_string(count).size()));
  std::string digits = std::to_string(index + 1);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return "ev" + digits;
}

void validate_session(const EVSession& ev, std::vector<std::string>& out) {
  const std::string who = "ev '" + ev.id + "': ";
  if (ev.id.empty()) out.push_back("ev with empty id");
  if (ev.departure < ev.arrival) {
    out.push_back(who + "empty charging window (departure " + str(ev.departure) + " < arrival " +
                  str(ev.arrival) + ")");
  }
  if (ev.arrival < 0) out.push_back(who + "arrival must be nonnegative");
  if (!(ev.p_min >= 0.0)) out.push_back(who + "p_min must be nonnegative (got " + str(ev.p_min) + ")");
  if (!(ev.p_max >= ev.p_min)) {
    out.push_back(who + "power bounds inverted (p_max " + str(ev.p_max) + " < p_min " + str(ev.p_min) + ")");
  }
  if (!(ev.xi >= 0.0 && ev.xi < 1.0)) out.push_back(who + "xi must lie in [0,1) (got " + str(ev.xi) + ")");
  if (!(ev.energy >= 0.0)) out.push_back(who + "SOC error must be nonnegative (got " + str(ev.energy) + ")");
  if (!(ev.weight > 0.0)) out.push_back(who + "utility weight must be positive (got " + str(ev.weight) + ")");
  if (!(ev.utility_offset + ev.p_min > 0.0)) {
    out.push_back(who + "utility offset + p_min must be positive (log undefined at the lower bound)");
  }
}

ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport report;
  auto& v = report.violations;

  if (!(s.grid.slot_minutes > 0.0)) v.push_back("grid: slot_minutes must be positive");
  if (s.grid.num_slots < 1) v.push_back("grid: num_slots must be at least 1");

  if (!(s.dso.a > 0.0)) v.push_back("dso: cost not strictly convex (a = " + str(s.dso.a) + ", need a > 0)");
  if (!(s.dso.p_min <= s.dso.p_max)) v.push_back("dso: generation bounds inverted (p_min > p_max)");

  if (s.storage) {
    const StorageSpec& st = *s.storage;
    if (!(st.ps_min <= 0.0 && 0.0 <= st.ps_max)) v.push_back("storage: need ps_min <= 0 <= ps_max");
    if (!(st.x0 >= 0.0)) v.push_back("storage: x0 must be nonnegative");
    if (!(st.x_ref >= 0.0)) v.push_back("storage: x_ref must be nonnegative");
    if (!(st.delta_s > 0.0 && st.delta_s <= 1.0)) v.push_back("storage: delta_s must lie in (0,1]");
    if (!(st.rho > 0.0)) v.push_back("storage: rho must be positive");
  }

  std::set<std::string> ids;
  for (const EVSession& ev : s.evs) {
    validate_session(ev, v);
    if (!ids.insert(ev.id).second) v.push_back("ev '" + ev.id + "': duplicate id");
  }

  const FleetGenerator& g = s.generate;
  for (int i = 0; i < g.count; ++i) {
    const std::string id = generated_id(i, g.count);
    if (ids.count(id)) v.push_back("ev '" + id + "': explicit id collides with a generated session");
  }
  if (g.count < 0) v.push_back("generate: count must be nonnegative");
  if (g.count > 0) {
    if (!(g.p_min >= 0.0 && g.p_min <= g.p_max)) v.push_back("generate: need 0 <= p_min <= p_max");
    if (!(g.xi >= 0.0 && g.xi < 1.0)) v.push_back("generate: xi must lie in [0,1) (got " + str(g.xi) + ")");
    if (!(g.weight > 0.0)) v.push_back("generate: weight must be positive");
    if (!(g.utility_offset + g.p_min > 0.0)) v.push_back("generate: offset + p_min must be positive");
    if (!(g.energy_min >= 0.0 && g.energy_min <= g.energy_max)) {
      v.push_back("generate: need 0 <= energy_min <= energy_max");
    }
  }

  const ConvergenceConfig& c = s.solver;
  if (!(c.gamma > 0.0)) v.push_back("solver: gamma must be positive");
  if (!(c.eps_balance > 0.0)) v.push_back("solver: eps_balance must be positive");
  if (c.k_max < 1) v.push_back("solver: k_max must be at least 1");
  if (c.threads < 1) v.push_back("solver: threads must be at least 1");
  if (!(s.tolerances.energy > 0.0)) v.push_back("solver: eps_energy must be positive");
  if (!(s.tolerances.kkt > 0.0)) v.push_back("solver: eps_kkt must be positive");
  if (!(s.initial_price >= 0.0)) v.push_back("solver: initial_price must be nonnegative");

  return report;
}

}  // namespace evmpc
