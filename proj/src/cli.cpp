#include "evmpc/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "evmpc/dso_agent.hpp"
#include "evmpc/mpc_loop.hpp"
#include "evmpc/oracle.hpp"
#include "evmpc/scenario_io.hpp"

namespace evmpc {

namespace {

struct Invocation {
  std::string scenario_path;
  std::string out_dir = "results";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int oracle_cap = OracleCap{}.max_slots;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> all_overrides(const Invocation& inv) {
  std::vector<std::string> o = inv.overrides;
  if (inv.seed) o.push_back("seed=" + std::to_string(*inv.seed));
  return o;
}

void print_summary(const SimulationTrace& trace, std::ostream& out) {
  const TraceSummary& s = trace.summary;
  out << "slots: " << trace.slots.size() << "  max iterations: " << s.max_iterations
      << "  non-converged slots: " << s.nonconverged_slots << "\n"
      << "price mean " << format_number(s.price_mean) << " stdev " << format_number(s.price_stdev)
      << " cent/kWh  peak demand " << format_number(s.peak_demand) << " kW\n"
      << "energy delivered " << format_number(s.total_energy) << " kWh  unmet " << format_number(s.unmet_energy)
      << " kWh\n";
}

int write_tables(const SimulationTrace& trace, const std::string& dir, std::ostream& out) {
  write_trace(trace, dir);
  const std::filesystem::path base(dir);
  out << "wrote " << (base / kSlotTableFile).string() << ", " << (base / kEvTableFile).string() << ", "
      << (base / kSummaryFile).string() << "\n";
  return kExitOk;
}

int cmd_run(const Invocation& inv, bool controlled, std::ostream& out, std::ostream& err) {
  const Scenario scenario = parse_scenario(read_file(inv.scenario_path), all_overrides(inv));
  const SimulationTrace trace = controlled ? run(scenario) : simulate_uncontrolled(scenario);
  print_summary(trace, out);
  write_tables(trace, inv.out_dir, out);
  if (trace.summary.nonconverged_slots > 0) {
    err << "warning: " << trace.summary.nonconverged_slots << " slot(s) did not reach the balance tolerance\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_verify(const Invocation& inv, std::ostream& out) {
  const Scenario scenario = parse_scenario(read_file(inv.scenario_path), all_overrides(inv));
  OracleCap cap;
  cap.max_slots = inv.oracle_cap;
  const VerifyReport r = verify_against_oracle(scenario, cap);
  out << "instance: " << r.evs << " vehicles, " << r.slots << " slots\n"
      << "decentralized welfare " << format_number(r.decentralized_welfare) << "\n"
      << "oracle welfare        " << format_number(r.oracle_welfare) << "\n"
      << "welfare gap           " << format_number(100.0 * r.relative_gap) << " %\n"
      << "balance residual      " << format_number(r.max_residual) << " kW after " << r.iterations
      << " iterations\n";
  const bool ok = r.negotiation_converged && r.oracle_converged && r.relative_gap <= 0.01 &&
                  r.max_residual <= scenario.solver.eps_balance;
  out << (ok ? "verify: ok\n" : "verify: FAILED\n");
  return ok ? kExitOk : kExitNotConverged;
}

int cmd_validate(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const Scenario scenario = parse_scenario_unchecked(read_file(inv.scenario_path), all_overrides(inv));
  const ValidationReport report = validate_scenario(scenario);
  if (report.ok()) {
    out << "scenario is valid\n";
    return kExitOk;
  }
  for (const std::string& v : report.violations) err << "invalid: " << v << "\n";
  return kExitInvalid;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decentralized MPC for EV charging with dual price coordination"};
  app.require_subcommand(1);

  Invocation inv;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", inv.scenario_path, "Scenario file")->required();
    sub->add_option("--out", inv.out_dir, "Output directory for the trace tables");
    sub->add_option("--seed", inv.seed, "Seed for generated sessions");
    sub->add_option("--set", inv.overrides, "Override a scenario key, e.g. solver.gamma=0.01")
        ->allow_extra_args(false);
    sub->add_option("--oracle-cap", inv.oracle_cap, "Slot cap of the verification instance")
        ->check(CLI::PositiveNumber);
  };
  CLI::App* run_cmd = app.add_subcommand("run", "Run the controlled receding-horizon simulation");
  CLI::App* unc_cmd = app.add_subcommand("uncontrolled", "Run the charge-at-maximum-power baseline");
  CLI::App* ver_cmd = app.add_subcommand("verify", "Compare the negotiated plan with the central oracle");
  CLI::App* val_cmd = app.add_subcommand("validate", "Check a scenario file");
  for (CLI::App* sub : {run_cmd, unc_cmd, ver_cmd, val_cmd}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(inv, true, out, err);
    if (unc_cmd->parsed()) return cmd_run(inv, false, out, err);
    if (ver_cmd->parsed()) return cmd_verify(inv, out);
    return cmd_validate(inv, out, err);
  } catch (const ScenarioInvalid& e) {
    for (const std::string& v : e.report().violations) err << "invalid: " << v << "\n";
    return kExitInvalid;
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    err << "error: writing output failed: " << e.what() << "\n";
    return kExitIo;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace evmpc
