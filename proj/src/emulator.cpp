#include "rydemu/emulator.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rydemu/analysis.hpp"
#include "rydemu/errors.hpp"
#include "rydemu/tdvp.hpp"

namespace rydemu {

using nlohmann::json;

RunResult run_emulation(const PulseSequence& seq, const EmulatorConfig& config, std::int64_t runs,
                        std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  if (runs < 1) throw ValidationError({"runs must be at least 1"});
  const auto start = clock::now();
  RunResult out;
  out.runs = runs;
  out.seed = seed;
  out.diagnostics.solver = config.solver;
  if (config.solver == SolverKind::exact) {
    ExactResult r = evolve_exact(seq, config);
    out.counts = sample_dense(r.final_state, runs, seed);
    out.final_excitation = excitation_probabilities(r.final_state);
    out.trajectory = std::move(r.trajectory);
    out.diagnostics.max_norm_drift = r.max_norm_deviation;
    out.diagnostics.max_chi = 0;
    out.diagnostics.max_mpo_bond = 0;
  } else {
    TdvpResult r = evolve_tdvp(seq, config);
    out.counts = sample(r.final_state, runs, seed);
    out.final_excitation = excitation_probabilities(r.final_state);
    out.trajectory = std::move(r.trajectory);
    auto& d = out.diagnostics;
    d.max_chi = r.diagnostics.max_chi;
    d.max_mpo_bond = r.diagnostics.max_mpo_bond;
    d.discarded_weight_cumulative = r.diagnostics.discarded_weight_cumulative;
    d.max_norm_drift = r.diagnostics.max_norm_drift;
    d.resource_limit = r.diagnostics.resource_limit;
    d.step_wall_ms = std::move(r.diagnostics.step_wall_ms);
    d.warnings = std::move(r.diagnostics.warnings);
    out.final_mps = std::move(r.final_state);
  }
  out.diagnostics.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
  return out;
}

std::string counts_record(const RunResult& result) {
  json counts = json::object();
  for (const auto& [bits, n] : result.counts) counts[bits] = n;
  json rec = {{"counts", counts}, {"rng", std::string(kRngName)}, {"runs", result.runs}, {"seed", result.seed}};
  return rec.dump() + "\n";
}

std::string diagnostics_record(const RunResult& result) {
  const auto& d = result.diagnostics;
  json rec = {
      {"solver", std::string(to_string(d.solver))},
      {"max_chi", d.max_chi},
      {"max_mpo_bond", d.max_mpo_bond},
      {"discarded_weight_cumulative", d.discarded_weight_cumulative},
      {"max_norm_drift", d.max_norm_drift},
      {"resource_limit", d.resource_limit},
      {"wall_ms", d.wall_ms},
      {"step_wall_ms", d.step_wall_ms},
      {"warnings", d.warnings},
  };
  return rec.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f << contents;
    f.flush();
    if (!f) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& result) {
  std::filesystem::create_directories(dir);
  std::ostringstream traj;
  write_heatmap_csv(traj, result.trajectory);
  write_file_atomic(dir / "trajectory.csv", traj.str());
  write_file_atomic(dir / "diagnostics.json", diagnostics_record(result));
  write_file_atomic(dir / "counts.json", counts_record(result));
}

}  // namespace rydemu
