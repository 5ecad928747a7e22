#pragma once

// One emulation job end to end: evolve with the configured solver, sample,
// and render the result records written by the CLI and the service.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rydemu/exact_solver.hpp"
#include "rydemu/mps.hpp"
#include "rydemu/pulse_ir.hpp"

namespace rydemu {

struct RunDiagnostics {
  SolverKind solver = SolverKind::tdvp;
  int max_chi = 1;
  int max_mpo_bond = 1;
  double discarded_weight_cumulative = 0.0;
  double max_norm_drift = 0.0;
  bool resource_limit = false;
  double wall_ms = 0.0;
  std::vector<double> step_wall_ms;
  std::vector<std::string> warnings;
};

struct RunResult {
  Counts counts;
  std::int64_t runs = 0;
  std::uint64_t seed = 0;
  Trajectory trajectory;
  RunDiagnostics diagnostics;
  Eigen::VectorXd final_excitation;
  /// Final MPS of a TDVP run; empty for the exact solver.
  std::optional<Mps> final_mps;
};

/// Shot count used when neither the caller nor the sequence gives one.
inline constexpr std::int64_t kDefaultRuns = 1000;

RunResult run_emulation(const PulseSequence& seq, const EmulatorConfig& config, std::int64_t runs,
                        std::uint64_t seed);

/// {"counts":{...},"rng":"mt19937_64","runs":R,"seed":S}, keys sorted, no
/// timing data, so identical inputs give identical bytes.
std::string counts_record(const RunResult& result);
/// max_chi, discarded_weight_cumulative, step_wall_ms, warnings, ...
std::string diagnostics_record(const RunResult& result);

/// Writes counts.json, trajectory.csv and diagnostics.json into `dir`,
/// each through a temporary file and a rename.
void write_run_outputs(const std::filesystem::path& dir, const RunResult& result);

/// Writes `contents` to `path` via `path.tmp` and an atomic rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace rydemu
