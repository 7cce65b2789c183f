#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "leomoe/experiment.hpp"
#include "leomoe/placement.hpp"
#include "leomoe/scenario.hpp"
#include "leomoe/validation.hpp"

namespace leomoe {

inline constexpr const char* kToolVersion = "leomoe 0.1.0";
inline constexpr const char* kOutDirEnv = "LEOMOE_OUT_DIR";

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitInfeasible = 3,
  kExitValidation = 4,
  kExitIo = 5,
};

/// --out when given, else $LEOMOE_OUT_DIR, else `fallback`.
std::string resolve_out_dir(const std::optional<std::string>& flag, const std::string& fallback);

/// Writes through a temporary file in the same directory and renames it
/// into place. Throws IoError naming the path.
void write_file_atomic(const std::string& path, const std::string& content);

/// Creates `dir` and writes resolved_scenario.ini and run_info.txt into it.
void write_run_stamp(const std::string& dir, const std::string& command, const Scenario& scenario,
                     std::uint64_t seed);

std::string plan_csv(const PlacementPlan& plan);
/// Inverse of plan_csv. Throws ConfigError on malformed rows.
PlacementPlan parse_plan_csv(const std::string& text, const std::string& source = "<plan>");
PlacementPlan load_plan(const std::string& path);

std::string expected_latency_csv(const ConstellationConfig& config,
                                 const std::vector<ExpectedPathLatencies>& latencies);
std::string report_csv(const LatencyReport& report);
std::string report_summary_csv(const std::vector<LatencyReport>& reports);
std::string report_plot_csv(const std::vector<LatencyReport>& reports);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_plot_csv(const std::vector<SweepRow>& rows);

/// Per-slot edge lists (edges.csv) and connectivity summary (topology_summary.csv).
void cmd_topology(const Scenario& scenario, const std::string& out_dir, std::uint64_t seed);

/// plan.csv, plus expected_latency.csv for the activation-aware strategy.
PlacementPlan cmd_place(const Scenario& scenario, Strategy strategy, const std::string& out_dir,
                        std::uint64_t seed);

/// report_<strategy>.csv, summary.csv and plot.csv for each plan.
std::vector<LatencyReport> cmd_evaluate(const Scenario& scenario,
                                        const std::vector<PlacementPlan>& plans,
                                        const std::string& out_dir, int n_trials,
                                        std::uint64_t seed);

/// sweep_<axis>.csv and sweep_<axis>_plot.csv per grid section.
std::vector<SweepRow> cmd_sweep(const Scenario& scenario, const std::string& grid_path,
                                const std::vector<Strategy>& strategies,
                                const std::string& out_dir, int n_trials, std::uint64_t seed);

/// Prints one line per property; returns true when all passed.
bool cmd_validate(const ValidationOptions& options, std::ostream& out);

}  // namespace leomoe
