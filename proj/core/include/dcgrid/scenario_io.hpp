#pragma once

#include <string>

#include "dcgrid/analysis.hpp"
#include "dcgrid/lyapunov.hpp"
#include "dcgrid/simulator.hpp"

namespace dcgrid {

/// Parses a scenario from JSON text. The schema is strict: unknown keys are
/// rejected, and every violation is reported as a ConfigError carrying the
/// JSON pointer of the offending key.
[[nodiscard]] Scenario parse_scenario(const std::string& json_text);

/// Reads and parses a scenario file; the scenario name defaults to the file
/// stem when the document does not set one.
[[nodiscard]] Scenario load_scenario(const std::string& path);

/// JSON renderings (two-space indent, trailing newline) of the report types,
/// for CLI output and machine consumption.
[[nodiscard]] std::string to_json(const ConditionReport& report);
[[nodiscard]] std::string to_json(const EquilibriumReport& report);
[[nodiscard]] std::string to_json(const DecreaseAuditReport& report);
[[nodiscard]] std::string to_json(const SteadyStateReport& report);

}  // namespace dcgrid
