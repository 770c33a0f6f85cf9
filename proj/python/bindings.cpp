#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "evmpc/coordinator.hpp"
#include "evmpc/dso_agent.hpp"
#include "evmpc/ev_agent.hpp"
#include "evmpc/mpc_loop.hpp"
#include "evmpc/oracle.hpp"
#include "evmpc/scenario_io.hpp"

namespace py = pybind11;
using namespace evmpc;

namespace {

template <typename Fn>
std::string to_text(const SimulationTrace& t, Fn write) {
  std::ostringstream out;
  write(t, out);
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_evmpc, m) {
  m.doc() = "Decentralized MPC for EV charging with dual price coordination";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ScenarioError>(m, "ScenarioError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<TimeGrid>(m, "TimeGrid")
      .def(py::init<int, int, double>(), py::arg("t"), py::arg("n"), py::arg("slot_hours"))
      .def_property_readonly("t", &TimeGrid::t)
      .def_property_readonly("n", &TimeGrid::n)
      .def_property_readonly("slot_hours", &TimeGrid::slot_hours);

  py::class_<EVSession>(m, "EVSession")
      .def(py::init([](std::string id, int arrival, int departure, double energy, double p_min, double p_max,
                       double weight, double xi, double offset) {
             return EVSession{std::move(id), arrival, departure, p_min, p_max, weight, xi, energy, offset};
           }),
           py::arg("id"), py::arg("arrival"), py::arg("departure"), py::arg("energy"), py::arg("p_min") = 0.0,
           py::arg("p_max") = 22.0, py::arg("weight") = 10.0, py::arg("xi") = 0.0, py::arg("offset") = 1.0)
      .def_readwrite("id", &EVSession::id)
      .def_readwrite("arrival", &EVSession::arrival)
      .def_readwrite("departure", &EVSession::departure)
      .def_readwrite("p_min", &EVSession::p_min)
      .def_readwrite("p_max", &EVSession::p_max)
      .def_readwrite("weight", &EVSession::weight)
      .def_readwrite("xi", &EVSession::xi)
      .def_readwrite("energy", &EVSession::energy)
      .def_readwrite("utility_offset", &EVSession::utility_offset)
      .def("__repr__", [](const EVSession& e) {
        return "EVSession('" + e.id + "', arrival=" + std::to_string(e.arrival) +
               ", departure=" + std::to_string(e.departure) + ", energy=" + format_number(e.energy) + ")";
      });

  py::class_<DSOSpec>(m, "DSOSpec")
      .def(py::init([](double a, double b, double p_min, double p_max) { return DSOSpec{a, b, p_min, p_max}; }),
           py::arg("a") = 0.06, py::arg("b") = 0.9, py::arg("p_min") = 0.0, py::arg("p_max") = 100.0)
      .def_readwrite("a", &DSOSpec::a)
      .def_readwrite("b", &DSOSpec::b)
      .def_readwrite("p_min", &DSOSpec::p_min)
      .def_readwrite("p_max", &DSOSpec::p_max);

  py::class_<StorageSpec>(m, "StorageSpec")
      .def(py::init([](double ps_min, double ps_max, double x0, double x_ref, double delta_s, double rho) {
             return StorageSpec{ps_min, ps_max, x0, x_ref, delta_s, rho};
           }),
           py::arg("ps_min") = 0.0, py::arg("ps_max") = 0.0, py::arg("x0") = 0.0, py::arg("x_ref") = 0.0,
           py::arg("delta_s") = 1.0, py::arg("rho") = 1.0)
      .def_readwrite("ps_min", &StorageSpec::ps_min)
      .def_readwrite("ps_max", &StorageSpec::ps_max)
      .def_readwrite("x0", &StorageSpec::x0)
      .def_readwrite("x_ref", &StorageSpec::x_ref)
      .def_readwrite("delta_s", &StorageSpec::delta_s)
      .def_readwrite("rho", &StorageSpec::rho);

  py::class_<Tolerances>(m, "Tolerances")
      .def(py::init<>())
      .def_readwrite("energy", &Tolerances::energy)
      .def_readwrite("kkt", &Tolerances::kkt)
      .def_readwrite("max_bisection", &Tolerances::max_bisection)
      .def_readwrite("max_dso_iterations", &Tolerances::max_dso_iterations);

  py::enum_<StepSchedule>(m, "StepSchedule")
      .value("constant", StepSchedule::constant)
      .value("diminishing", StepSchedule::diminishing);

  py::class_<ConvergenceConfig>(m, "ConvergenceConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &ConvergenceConfig::gamma)
      .def_readwrite("eps_balance", &ConvergenceConfig::eps_balance)
      .def_readwrite("k_max", &ConvergenceConfig::k_max)
      .def_readwrite("step_schedule", &ConvergenceConfig::step_schedule)
      .def_readwrite("threads", &ConvergenceConfig::threads);

  py::class_<GridConfig>(m, "GridConfig")
      .def(py::init<>())
      .def_readwrite("slot_minutes", &GridConfig::slot_minutes)
      .def_readwrite("num_slots", &GridConfig::num_slots)
      .def_property_readonly("slot_hours", &GridConfig::slot_hours);

  py::class_<FleetGenerator>(m, "FleetGenerator")
      .def(py::init<>())
      .def_readwrite("count", &FleetGenerator::count)
      .def_readwrite("p_min", &FleetGenerator::p_min)
      .def_readwrite("p_max", &FleetGenerator::p_max)
      .def_readwrite("weight", &FleetGenerator::weight)
      .def_readwrite("xi", &FleetGenerator::xi)
      .def_readwrite("utility_offset", &FleetGenerator::utility_offset)
      .def_readwrite("energy_min", &FleetGenerator::energy_min)
      .def_readwrite("energy_max", &FleetGenerator::energy_max);

  py::class_<Scenario>(m, "Scenario")
      .def(py::init<>())
      .def_readwrite("grid", &Scenario::grid)
      .def_readwrite("dso", &Scenario::dso)
      .def_readwrite("storage", &Scenario::storage)
      .def_readwrite("evs", &Scenario::evs)
      .def_readwrite("generate", &Scenario::generate)
      .def_readwrite("solver", &Scenario::solver)
      .def_readwrite("tolerances", &Scenario::tolerances)
      .def_readwrite("initial_price", &Scenario::initial_price)
      .def_readwrite("seed", &Scenario::seed)
      .def("__eq__", [](const Scenario& a, const Scenario& b) { return a == b; });

  py::class_<EvSlotState>(m, "EvSlotState")
      .def_readonly("id", &EvSlotState::id)
      .def_readonly("power", &EvSlotState::power)
      .def_readonly("soc_error", &EvSlotState::soc_error);

  py::class_<SlotRecord>(m, "SlotRecord")
      .def_readonly("slot", &SlotRecord::slot)
      .def_readonly("price_applied", &SlotRecord::price_applied)
      .def_readonly("demand_total", &SlotRecord::demand_total)
      .def_readonly("p_l", &SlotRecord::p_l)
      .def_readonly("p_s", &SlotRecord::p_s)
      .def_readonly("x_s", &SlotRecord::x_s)
      .def_readonly("per_ev", &SlotRecord::per_ev)
      .def_readonly("iterations", &SlotRecord::iterations)
      .def_readonly("residual", &SlotRecord::residual)
      .def_readonly("converged", &SlotRecord::converged);

  py::class_<EvOutcome>(m, "EvOutcome")
      .def_readonly("id", &EvOutcome::id)
      .def_readonly("arrival", &EvOutcome::arrival)
      .def_readonly("departure", &EvOutcome::departure)
      .def_readonly("initial_energy", &EvOutcome::initial_energy)
      .def_readonly("final_energy", &EvOutcome::final_energy)
      .def_readonly("delivered", &EvOutcome::delivered);

  py::class_<TraceSummary>(m, "TraceSummary")
      .def_readonly("price_mean", &TraceSummary::price_mean)
      .def_readonly("price_stdev", &TraceSummary::price_stdev)
      .def_readonly("peak_demand", &TraceSummary::peak_demand)
      .def_readonly("total_energy", &TraceSummary::total_energy)
      .def_readonly("unmet_energy", &TraceSummary::unmet_energy)
      .def_readonly("max_iterations", &TraceSummary::max_iterations)
      .def_readonly("nonconverged_slots", &TraceSummary::nonconverged_slots);

  py::class_<SimulationTrace>(m, "SimulationTrace")
      .def_readonly("slot_hours", &SimulationTrace::slot_hours)
      .def_readonly("slots", &SimulationTrace::slots)
      .def_readonly("evs", &SimulationTrace::evs)
      .def_readonly("summary", &SimulationTrace::summary)
      .def("slot_table", [](const SimulationTrace& t) { return to_text(t, write_slot_table); })
      .def("ev_table", [](const SimulationTrace& t) { return to_text(t, write_ev_table); })
      .def("summary_table", [](const SimulationTrace& t) { return to_text(t, write_summary); })
      .def("write", [](const SimulationTrace& t, const std::filesystem::path& dir) { write_trace(t, dir); },
           py::arg("directory"));

  py::class_<EVSolution>(m, "EVSolution")
      .def_readonly("profile", &EVSolution::profile)
      .def_readonly("mu", &EVSolution::mu)
      .def_readonly("objective", &EVSolution::objective)
      .def_readonly("feasible", &EVSolution::feasible);

  py::class_<DSOSolution>(m, "DSOSolution")
      .def_readonly("p_l", &DSOSolution::p_l)
      .def_readonly("p_s", &DSOSolution::p_s)
      .def_readonly("objective", &DSOSolution::objective)
      .def_readonly("kkt_residual", &DSOSolution::kkt_residual)
      .def_readonly("iterations", &DSOSolution::iterations);

  py::class_<VerifyReport>(m, "VerifyReport")
      .def_readonly("decentralized_welfare", &VerifyReport::decentralized_welfare)
      .def_readonly("oracle_welfare", &VerifyReport::oracle_welfare)
      .def_readonly("relative_gap", &VerifyReport::relative_gap)
      .def_readonly("max_residual", &VerifyReport::max_residual)
      .def_readonly("iterations", &VerifyReport::iterations)
      .def_readonly("negotiation_converged", &VerifyReport::negotiation_converged)
      .def_readonly("oracle_converged", &VerifyReport::oracle_converged);

  m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("overrides") = std::vector<std::string>{},
        "Parse and validate scenario text; raises ScenarioError.");
  m.def("write_scenario", &write_scenario, py::arg("scenario"));
  m.def(
      "validate",
      [](const Scenario& s) { return validate_scenario(s).violations; }, py::arg("scenario"),
      "List of invariant violations, empty when the scenario is valid.");
  m.def("sessions", &scenario_sessions, py::arg("scenario"), "Explicit plus generated sessions.");

  m.def("run", &run, py::arg("scenario"), py::call_guard<py::gil_scoped_release>());
  m.def("simulate_uncontrolled", &simulate_uncontrolled, py::arg("scenario"),
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "verify",
      [](const Scenario& s, int cap_slots) {
        OracleCap cap;
        cap.max_slots = cap_slots;
        return verify_against_oracle(s, cap);
      },
      py::arg("scenario"), py::arg("oracle_cap") = OracleCap{}.max_slots, py::call_guard<py::gil_scoped_release>());

  m.def("utility", &utility, py::arg("p"), py::arg("weight"), py::arg("offset") = 1.0);
  m.def("generation_cost", &generation_cost, py::arg("q"), py::arg("dso"));
  m.def(
      "storage_tracking_penalty",
      [](double x_now, const std::vector<double>& p_s, const StorageSpec& st, double hours) {
        return storage_tracking_penalty(x_now, p_s, st, hours);
      },
      py::arg("x_now"), py::arg("p_s"), py::arg("storage"), py::arg("slot_hours"));
  m.def(
      "update_price",
      [](const std::vector<double>& lambda, const std::vector<double>& residual, double gamma) {
        const PriceVector next = update_price(PriceVector(lambda), residual, gamma);
        return std::vector<double>(next.values().begin(), next.values().end());
      },
      py::arg("prices"), py::arg("residual"), py::arg("gamma"));
  m.def(
      "solve_ev",
      [](const EVSession& ev, int t, double hours, const std::vector<double>& prices, const Tolerances& eps) {
        return solve_ev(make_ev_subproblem(ev, t, hours, PriceVector(prices)), eps);
      },
      py::arg("session"), py::arg("t"), py::arg("slot_hours"), py::arg("prices"), py::arg("tolerances") = Tolerances{},
      "Best charging plan at the given window prices (price per kW and slot).");
  m.def(
      "solve_dso",
      [](const DSOSpec& dso, const StorageSpec& st, double x_now, double hours, const std::vector<double>& prices,
         const Tolerances& eps) {
        const DSOSubproblem sub{dso, st, x_now, TimeGrid(0, static_cast<int>(prices.size()), hours),
                                PriceVector(prices)};
        return solve_dso(sub, eps);
      },
      py::arg("dso"), py::arg("storage"), py::arg("x_now"), py::arg("slot_hours"), py::arg("prices"),
      py::arg("tolerances") = Tolerances{});
  m.def("to_internal_price", &to_internal_price, py::arg("cents_per_kwh"), py::arg("slot_hours"));
}
