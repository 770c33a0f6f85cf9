#include "evmpc/scenario_io.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace evmpc {

ScenarioError::ScenarioError(const std::string& what, int line, int column)
    : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ")"
                                  : what),
      line_(line),
      column_(column) {}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

}  // namespace

ScenarioInvalid::ScenarioInvalid(ValidationReport report)
    : ScenarioError("invalid scenario: " + join(report.violations)), report_(std::move(report)) {}

namespace {

[[noreturn]] void fail_at(const std::string& what, const YAML::Mark& mark) {
  if (mark.is_null()) throw ScenarioError(what);
  throw ScenarioError(what, mark.line + 1, mark.column + 1);
}

// Reads the keys of one mapping and rejects the ones nobody asked for.
class Fields {
 public:
  Fields(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail_at("expected a mapping at '" + where() + "'", node_.Mark());
  }

  bool has(const std::string& key) const { return node_.IsMap() && node_[key] && !node_[key].IsNull(); }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_.IsMap() ? node_[key] : YAML::Node();
  }

  template <typename T>
  T required(const std::string& key) {
    if (!has(key)) throw ScenarioError("missing required key: " + qualified(key));
    return convert<T>(child(key), key);
  }

  template <typename T>
  T optional(const std::string& key, T fallback) {
    if (!has(key)) {
      seen_.insert(key);
      return fallback;
    }
    return convert<T>(child(key), key);
  }

  void finish() const {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail_at("unknown key: " + qualified(key), kv.first.Mark());
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  template <typename T>
  T convert(const YAML::Node& value, const std::string& key) const {
    if (!value.IsScalar()) fail_at("expected a scalar for " + qualified(key), value.Mark());
    try {
      return value.as<T>();
    } catch (const YAML::BadConversion&) {
      fail_at("cannot read value '" + value.Scalar() + "' for " + qualified(key), value.Mark());
    }
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

StepSchedule parse_schedule(const std::string& text) {
  if (text == "constant") return StepSchedule::constant;
  if (text == "diminishing") return StepSchedule::diminishing;
  throw ScenarioError("solver.step_schedule must be 'constant' or 'diminishing' (got '" + text + "')");
}

const char* schedule_name(StepSchedule s) { return s == StepSchedule::constant ? "constant" : "diminishing"; }

EVSession read_session(const YAML::Node& node, const std::string& path) {
  Fields f(node, path);
  EVSession ev;
  ev.id = f.required<std::string>("id");
  ev.arrival = f.required<int>("arrival");
  ev.departure = f.required<int>("departure");
  ev.energy = f.required<double>("energy");
  ev.p_min = f.optional("p_min", ev.p_min);
  ev.p_max = f.optional("p_max", ev.p_max);
  ev.weight = f.optional("weight", ev.weight);
  ev.xi = f.optional("xi", ev.xi);
  ev.utility_offset = f.optional("offset", ev.utility_offset);
  f.finish();
  return ev;
}

Scenario read_scenario(const YAML::Node& root) {
  Fields top(root, "");
  Scenario s;

  if (!top.has("grid")) throw ScenarioError("missing required key: grid");
  {
    Fields f(top.child("grid"), "grid");
    s.grid.slot_minutes = f.required<double>("slot_minutes");
    s.grid.num_slots = f.required<int>("num_slots");
    f.finish();
  }

  if (!top.has("dso")) throw ScenarioError("missing required key: dso");
  {
    Fields f(top.child("dso"), "dso");
    s.dso.a = f.required<double>("a");
    s.dso.b = f.required<double>("b");
    s.dso.p_max = f.required<double>("p_max");
    s.dso.p_min = f.optional("p_min", 0.0);
    f.finish();
  }

  if (top.has("storage")) {
    Fields f(top.child("storage"), "storage");
    StorageSpec st;
    st.ps_min = f.required<double>("ps_min");
    st.ps_max = f.required<double>("ps_max");
    st.x0 = f.required<double>("x0");
    st.x_ref = f.required<double>("x_ref");
    st.delta_s = f.optional("delta_s", st.delta_s);
    st.rho = f.optional("rho", st.rho);
    f.finish();
    s.storage = st;
  } else {
    top.child("storage");
  }

  {
    Fields f(top.child("solver"), "solver");
    ConvergenceConfig& c = s.solver;
    c.gamma = f.optional("gamma", c.gamma);
    c.eps_balance = f.optional("eps_balance", c.eps_balance);
    c.k_max = f.optional("k_max", c.k_max);
    c.step_schedule = parse_schedule(f.optional<std::string>("step_schedule", schedule_name(c.step_schedule)));
    c.threads = f.optional("threads", c.threads);
    Tolerances& t = s.tolerances;
    t.energy = f.optional("eps_energy", t.energy);
    t.kkt = f.optional("eps_kkt", t.kkt);
    t.max_bisection = f.optional("max_bisection", t.max_bisection);
    t.max_dso_iterations = f.optional("max_dso_iterations", t.max_dso_iterations);
    s.initial_price = f.optional("initial_price", s.initial_price);
    f.finish();
  }

  if (top.has("generate")) {
    Fields f(top.child("generate"), "generate");
    FleetGenerator& g = s.generate;
    g.count = f.required<int>("count");
    g.p_min = f.optional("p_min", g.p_min);
    g.p_max = f.optional("p_max", g.p_max);
    g.weight = f.optional("weight", g.weight);
    g.xi = f.optional("xi", g.xi);
    g.utility_offset = f.optional("offset", g.utility_offset);
    g.energy_min = f.optional("energy_min", g.energy_min);
    g.energy_max = f.optional("energy_max", g.energy_max);
    f.finish();
  } else {
    top.child("generate");
  }

  if (top.has("evs")) {
    const YAML::Node list = top.child("evs");
    if (!list.IsSequence()) fail_at("expected a list at 'evs'", list.Mark());
    for (std::size_t i = 0; i < list.size(); ++i) {
      s.evs.push_back(read_session(list[i], "evs." + std::to_string(i)));
    }
  } else {
    top.child("evs");
  }

  s.seed = top.optional<std::uint64_t>("seed", 0);
  top.finish();
  return s;
}

void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ScenarioError("malformed override '" + assignment + "' (expected key=value)");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  std::vector<std::string> keys;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ScenarioError("malformed override key '" + path + "'");
    keys.push_back(part);
  }

  if (!root.IsMap() && !root.IsNull()) throw ScenarioError("cannot apply override to a non-mapping document");
  YAML::Node cur = root;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    YAML::Node next;
    if (cur.IsSequence()) {
      std::size_t index = 0;
      const auto [ptr, ec] = std::from_chars(keys[i].data(), keys[i].data() + keys[i].size(), index);
      if (ec != std::errc() || ptr != keys[i].data() + keys[i].size() || index >= cur.size()) {
        throw ScenarioError("override '" + path + "': bad list index '" + keys[i] + "'");
      }
      next.reset(cur[index]);
    } else {
      next.reset(cur[keys[i]]);
    }
    cur.reset(next);
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ScenarioError("override '" + path + "': cannot parse value '" + value + "': " + e.msg);
  }
  if (cur.IsSequence()) throw ScenarioError("override '" + path + "': cannot replace a list element");
  cur[keys.back()] = parsed;
}

YAML::Node load_tree(std::string_view text, const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ScenarioError("syntax error: " + e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const std::string& o : overrides) apply_override(root, o);
  return root;
}

}  // namespace

Scenario parse_scenario_unchecked(std::string_view text, const std::vector<std::string>& overrides) {
  const YAML::Node root = load_tree(text, overrides);
  try {
    return read_scenario(root);
  } catch (const ScenarioError&) {
    throw;
  } catch (const YAML::Exception& e) {
    throw ScenarioError(e.msg, e.mark.is_null() ? 0 : e.mark.line + 1, e.mark.is_null() ? 0 : e.mark.column + 1);
  }
}

Scenario parse_scenario(std::string_view text, const std::vector<std::string>& overrides) {
  Scenario s = parse_scenario_unchecked(text, overrides);
  ValidationReport report = validate_scenario(s);
  if (!report.ok()) throw ScenarioInvalid(std::move(report));
  return s;
}

namespace {

// Shortest text that reads back to the same double.
std::string exact(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quoted(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') out += '\'';
    out += ch;
  }
  return out + "'";
}

}  // namespace

std::string write_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "grid:\n"
     << "  slot_minutes: " << exact(s.grid.slot_minutes) << "\n"
     << "  num_slots: " << s.grid.num_slots << "\n";
  os << "dso:\n"
     << "  a: " << exact(s.dso.a) << "\n"
     << "  b: " << exact(s.dso.b) << "\n"
     << "  p_min: " << exact(s.dso.p_min) << "\n"
     << "  p_max: " << exact(s.dso.p_max) << "\n";
  if (s.storage) {
    const StorageSpec& st = *s.storage;
    os << "storage:\n"
       << "  ps_min: " << exact(st.ps_min) << "\n"
       << "  ps_max: " << exact(st.ps_max) << "\n"
       << "  x0: " << exact(st.x0) << "\n"
       << "  x_ref: " << exact(st.x_ref) << "\n"
       << "  delta_s: " << exact(st.delta_s) << "\n"
       << "  rho: " << exact(st.rho) << "\n";
  }
  const ConvergenceConfig& c = s.solver;
  const Tolerances& t = s.tolerances;
  os << "solver:\n"
     << "  initial_price: " << exact(s.initial_price) << "\n"
     << "  gamma: " << exact(c.gamma) << "\n"
     << "  eps_balance: " << exact(c.eps_balance) << "\n"
     << "  k_max: " << c.k_max << "\n"
     << "  step_schedule: " << schedule_name(c.step_schedule) << "\n"
     << "  threads: " << c.threads << "\n"
     << "  eps_energy: " << exact(t.energy) << "\n"
     << "  eps_kkt: " << exact(t.kkt) << "\n"
     << "  max_bisection: " << t.max_bisection << "\n"
     << "  max_dso_iterations: " << t.max_dso_iterations << "\n";
  const FleetGenerator& g = s.generate;
  os << "generate:\n"
     << "  count: " << g.count << "\n"
     << "  p_min: " << exact(g.p_min) << "\n"
     << "  p_max: " << exact(g.p_max) << "\n"
     << "  weight: " << exact(g.weight) << "\n"
     << "  xi: " << exact(g.xi) << "\n"
     << "  offset: " << exact(g.utility_offset) << "\n"
     << "  energy_min: " << exact(g.energy_min) << "\n"
     << "  energy_max: " << exact(g.energy_max) << "\n";
  if (s.evs.empty()) {
    os << "evs: []\n";
  } else {
    os << "evs:\n";
    for (const EVSession& ev : s.evs) {
      os << "  - id: " << quoted(ev.id) << "\n"
         << "    arrival: " << ev.arrival << "\n"
         << "    departure: " << ev.departure << "\n"
         << "    energy: " << exact(ev.energy) << "\n"
         << "    p_min: " << exact(ev.p_min) << "\n"
         << "    p_max: " << exact(ev.p_max) << "\n"
         << "    weight: " << exact(ev.weight) << "\n"
         << "    xi: " << exact(ev.xi) << "\n"
         << "    offset: " << exact(ev.utility_offset) << "\n";
    }
  }
  os << "seed: " << s.seed << "\n";
  return os.str();
}

std::vector<EVSession> generate_evs(int count, const GridConfig& grid, const FleetGenerator& bounds,
                                    std::uint64_t seed) {
  std::vector<EVSession> out;
  if (count <= 0 || grid.num_slots < 1) return out;

  // mt19937_64 is fully specified; the mapping to ranges is done by hand so the
  // sequence does not depend on the standard library's distributions.
  std::mt19937_64 rng(seed);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto integer = [&](int lo, int hi) {  // inclusive
    const int span = hi - lo + 1;
    return lo + std::min(span - 1, static_cast<int>(unit() * span));
  };

  const double hours = grid.slot_hours();
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    EVSession ev;
    ev.id = generated_id(i, count);
    ev.arrival = integer(0, grid.num_slots - 1);
    ev.departure = integer(ev.arrival + 1, grid.num_slots);
    ev.p_min = bounds.p_min;
    ev.p_max = bounds.p_max;
    ev.weight = bounds.weight;
    ev.xi = bounds.xi;
    ev.utility_offset = bounds.utility_offset;

    const double stay = ev.departure - ev.arrival;
    const double reachable = ev.energy_per_kw(hours) * ev.p_max * stay;
    const double floor = ev.energy_per_kw(hours) * ev.p_min * stay;
    const double lo = std::clamp(bounds.energy_min, floor, reachable);
    const double hi = std::clamp(bounds.energy_max, lo, reachable);
    ev.energy = lo + unit() * (hi - lo);
    out.push_back(std::move(ev));
  }
  return out;
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

void write_slot_table(const SimulationTrace& trace, std::ostream& out) {
  out << "slot,time_hours,price_applied,demand_total_kw,p_l_kw,p_s_kw,storage_soc_kwh,iterations,residual_kw,"
         "converged\n";
  for (const SlotRecord& r : trace.slots) {
    out << r.slot << ',' << format_number(r.slot * trace.slot_hours) << ',' << format_number(r.price_applied) << ','
        << format_number(r.demand_total) << ',' << format_number(r.p_l) << ',' << format_number(r.p_s) << ','
        << format_number(r.x_s) << ',' << r.iterations << ',' << format_number(r.residual) << ','
        << (r.converged ? "true" : "false") << '\n';
  }
}

void write_ev_table(const SimulationTrace& trace, std::ostream& out) {
  out << "slot,ev_id,power_kw,soc_error_kwh\n";
  for (const SlotRecord& r : trace.slots) {
    for (const EvSlotState& e : r.per_ev) {
      out << r.slot << ',' << e.id << ',' << format_number(e.power) << ',' << format_number(e.soc_error) << '\n';
    }
  }
}

void write_summary(const SimulationTrace& trace, std::ostream& out) {
  const TraceSummary& s = trace.summary;
  out << "price_mean,price_stdev,peak_demand_kw,total_energy_kwh,unmet_energy_kwh\n";
  out << format_number(s.price_mean) << ',' << format_number(s.price_stdev) << ',' << format_number(s.peak_demand)
      << ',' << format_number(s.total_energy) << ',' << format_number(s.unmet_energy) << '\n';
}

void write_trace(const SimulationTrace& trace, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto emit = [&](const char* name, void (*writer)(const SimulationTrace&, std::ostream&)) {
    std::ofstream file;
    file.exceptions(std::ios::failbit | std::ios::badbit);
    file.open(dir / name, std::ios::binary | std::ios::trunc);
    writer(trace, file);
    file.flush();
  };
  emit(kSlotTableFile, write_slot_table);
  emit(kEvTableFile, write_ev_table);
  emit(kSummaryFile, write_summary);
}

}  // namespace evmpc
