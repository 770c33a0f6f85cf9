#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "evmpc/mpc_loop.hpp"
#include "evmpc/scenario_io.hpp"

using namespace evmpc;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::filesystem::path kScenarios = std::filesystem::path(EVMPC_SOURCE_DIR) / "scenarios";

}  // namespace

TEST_CASE("shipped reference scenario") {
  const Scenario s = parse_scenario(slurp(kScenarios / "table1.scenario"));
  CHECK(s.dso.a == 0.06);
  CHECK(s.dso.b == 0.9);
  REQUIRE(s.storage.has_value());
  CHECK(s.storage->x0 == 100.0);
  CHECK(s.storage->x_ref == 100.0);
  CHECK(s.generate.p_max == 22.0);
  CHECK(s.generate.weight == 10.0);
  CHECK(s.grid.num_slots == 48);
  CHECK(s.grid.slot_minutes == 15.0);
  CHECK(s.initial_price == 16.0);
}

TEST_CASE("empty document is missing its grid") {
  try {
    parse_scenario("");
    FAIL("expected an error");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()) == "missing required key: grid");
  }
}

TEST_CASE("out-of-range loss fraction is an invariant violation") {
  CHECK_THROWS_AS(parse_scenario(slurp(kScenarios / "broken.scenario")), ScenarioInvalid);
  const Scenario raw = parse_scenario_unchecked(slurp(kScenarios / "broken.scenario"));
  CHECK(raw.evs.at(0).xi == 1.2);
}

TEST_CASE("errors carry a position") {
  const char* text = "grid:\n  slot_minutes: 15\n  num_slots: many\ndso: {a: 0.06, b: 0.9, p_max: 100}\n";
  try {
    parse_scenario(text);
    FAIL("expected an error");
  } catch (const ScenarioError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() > 0);
  }
}

TEST_CASE("unknown keys are rejected") {
  const char* text = "grid: {slot_minutes: 15, num_slots: 4}\ndso: {a: 0.06, b: 0.9, p_max: 100}\ncolour: red\n";
  CHECK_THROWS_AS(parse_scenario(text), ScenarioError);
}

TEST_CASE("defaults are filled in") {
  const Scenario s = parse_scenario("grid: {slot_minutes: 15, num_slots: 4}\ndso: {a: 0.06, b: 0.9, p_max: 100}\n");
  CHECK(s.dso.p_min == 0.0);
  CHECK(s.solver.gamma == 0.005);
  CHECK(s.solver.eps_balance == 0.1);
  CHECK(s.solver.k_max == 2000);
  CHECK_FALSE(s.storage.has_value());
}

TEST_CASE("overrides edit nested keys and list entries") {
  const Scenario s = parse_scenario(slurp(kScenarios / "small.scenario"),
                                    {"solver.gamma=0.01", "evs.1.energy=2.5", "seed=77"});
  CHECK(s.solver.gamma == 0.01);
  CHECK(s.evs.at(1).energy == 2.5);
  CHECK(s.seed == 77);
  CHECK_THROWS_AS(parse_scenario(slurp(kScenarios / "small.scenario"), {"solver.gamma"}), ScenarioError);
}

TEST_CASE("write then parse is the identity") {
  Scenario s = parse_scenario(slurp(kScenarios / "table1.scenario"));
  s.evs.push_back({.id = "odd name: #1", .arrival = 3, .departure = 9, .p_max = 11.0, .xi = 0.1, .energy = 7.125});
  s.solver.step_schedule = StepSchedule::diminishing;
  s.tolerances.kkt = 1e-9;
  const Scenario back = parse_scenario(write_scenario(s));
  CHECK(back == s);
}

TEST_CASE("generator") {
  GridConfig grid;
  FleetGenerator g;
  g.count = 20;
  g.energy_max = 30.0;
  CHECK(generate_evs(0, grid, g, 1).empty());
  CHECK(generate_evs(20, grid, g, 5) == generate_evs(20, grid, g, 5));
  CHECK(generate_evs(20, grid, g, 5) != generate_evs(20, grid, g, 6));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (const EVSession& ev : generate_evs(20, grid, g, seed)) {
      CHECK(ev.arrival >= 0);
      CHECK(ev.departure <= grid.num_slots);
      CHECK(ev.arrival < ev.departure);
      CHECK(ev.energy <= ev.energy_per_kw(grid.slot_hours()) * ev.p_max * (ev.departure - ev.arrival) + 1e-9);
    }
  }
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.0) == "0.000000");
  CHECK(format_number(-0.0) == "0.000000");
  CHECK(format_number(-1e-9) == "0.000000");
  CHECK(format_number(15.0) == "15.000000");
  CHECK(format_number(-3.375) == "-3.375000");
}

TEST_CASE("trace tables") {
  Scenario idle;
  idle.grid.num_slots = 1;
  SimulationTrace t = run(idle);
  std::ostringstream slots;
  write_slot_table(t, slots);
  std::istringstream lines(slots.str());
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header ==
        "slot,time_hours,price_applied,demand_total_kw,p_l_kw,p_s_kw,storage_soc_kwh,iterations,residual_kw,converged");
  CHECK(row.rfind("0,0.000000,", 0) == 0);
  CHECK(row.find(",0.000000,") != std::string::npos);  // demand column
  CHECK_FALSE(std::getline(lines, extra));

  t.slots[0].converged = false;
  std::ostringstream flagged;
  write_slot_table(t, flagged);
  CHECK(flagged.str().find(",false\n") != std::string::npos);
}

TEST_CASE("reference run has one row per slot") {
  const Scenario s = parse_scenario(slurp(kScenarios / "table1.scenario"));
  const SimulationTrace t = run(s);
  std::ostringstream out;
  write_slot_table(t, out);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 49);
}
