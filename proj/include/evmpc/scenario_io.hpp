// Scenario files, seeded fleet generation and trace tables.
//
// Scenario files are YAML mappings; the grammar is documented in
// docs/scenario_format.md. Trace tables are comma-separated text with a header
// row, numbers printed with six decimals.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evmpc/model.hpp"
#include "evmpc/mpc_loop.hpp"

namespace evmpc {

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what, int line = 0, int column = 0);
  int line() const { return line_; }      // 1-based, 0 when not tied to a position
  int column() const { return column_; }  // 1-based

 private:
  int line_;
  int column_;
};

/// Thrown by parse_scenario when the text is well-formed but the scenario
/// breaks a model invariant.
class ScenarioInvalid : public ScenarioError {
 public:
  explicit ScenarioInvalid(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Parses, applies `overrides` ("dotted.key=value"), fills defaults and
/// validates. Unknown keys are errors.
Scenario parse_scenario(std::string_view text, const std::vector<std::string>& overrides = {});

/// Same as parse_scenario but skips validation, so broken scenarios can be reported.
Scenario parse_scenario_unchecked(std::string_view text, const std::vector<std::string>& overrides = {});

/// Canonical text form; parse_scenario(write_scenario(s)) == s.
std::string write_scenario(const Scenario& scenario);

/// Deterministic fleet: arrivals uniform over the slots, departures uniform
/// over (arrival, num_slots], SOC error uniform over the bounds' energy range
/// intersected with what the stay can deliver at p_max.
std::vector<EVSession> generate_evs(int count, const GridConfig& grid, const FleetGenerator& bounds,
                                    std::uint64_t seed);

/// Fixed six-decimal rendering used by every table; never prints "-0.000000".
std::string format_number(double value);

void write_slot_table(const SimulationTrace& trace, std::ostream& out);
void write_ev_table(const SimulationTrace& trace, std::ostream& out);
void write_summary(const SimulationTrace& trace, std::ostream& out);

inline constexpr const char* kSlotTableFile = "slots.csv";
inline constexpr const char* kEvTableFile = "ev_power.csv";
inline constexpr const char* kSummaryFile = "summary.csv";

/// Writes the three tables into `dir` (created if missing). Throws
/// std::filesystem::filesystem_error or std::ios_base::failure on I/O errors.
void write_trace(const SimulationTrace& trace, const std::filesystem::path& dir);

}  // namespace evmpc
