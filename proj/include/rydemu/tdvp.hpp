#pragma once

// Two-site TDVP over piecewise-constant MPO slices.
//
// One step of length dt is a left-to-right pass followed by the mirrored
// right-to-left pass, each evolving every bond forward by dt/2 and every
// interior single site backward by dt/2. The composition is symmetric and
// therefore second order in dt.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rydemu/exact_solver.hpp"
#include "rydemu/hamiltonian.hpp"
#include "rydemu/krylov.hpp"
#include "rydemu/mps.hpp"
#include "rydemu/pulse_ir.hpp"

namespace rydemu {

/// One χ×χ block per MPO bond index.
using Environment = std::vector<Eigen::MatrixXcd>;

/// Partial contractions of ⟨ψ|H|ψ⟩. left(k) covers chain sites [0, k),
/// right(k) covers [k, N).
class Environments {
 public:
  Environments(const Mps& mps, const Mpo& mpo);

  const Environment& left(std::size_t k) const { return left_[k]; }
  const Environment& right(std::size_t k) const { return right_[k]; }
  void update_left(std::size_t k, const SiteTensor& site, const MpoSite& w);
  void update_right(std::size_t k, const SiteTensor& site, const MpoSite& w);

  /// ⟨ψ|H|ψ⟩ closed at the orthogonality center of `mps`, which must be
  /// the state the environments were built from.
  double expectation_at_center(const Mps& mps, const Mpo& mpo) const;

 private:
  std::vector<Environment> left_;
  std::vector<Environment> right_;
};

Environment extend_left(const Environment& env, const SiteTensor& site, const MpoSite& w);
Environment extend_right(const Environment& env, const SiteTensor& site, const MpoSite& w);

/// ⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩ by a full contraction.
double energy(const Mps& mps, const Mpo& mpo);

struct IntegratorParams {
  double dt_ns = 10.0;
  KrylovOptions krylov;
  TruncationPolicy policy;
};

struct SweepStats {
  double discarded_weight = 0.0;
  /// |1 − ‖ψ‖| accumulated over the sweep before renormalising.
  double norm_drift = 0.0;
  int max_chi = 1;
  /// A bond hit max_bond_dim while the discarded weight was still above ε.
  bool resource_limit = false;
};

/// Advances `mps` by `dt_us` under `mpo`. The MPS must share the MPO's
/// ordering; on return its center is at site 0 and it is normalised.
SweepStats tdvp_sweep(Mps& mps, const Mpo& mpo, double dt_us, const IntegratorParams& params);

struct TdvpDiagnostics {
  int max_chi = 1;
  int max_mpo_bond = 1;
  double discarded_weight_cumulative = 0.0;
  double max_norm_drift = 0.0;
  bool resource_limit = false;
  std::vector<double> step_wall_ms;
  std::vector<int> step_max_chi;
  std::vector<std::string> warnings;
};

struct TdvpResult {
  Mps final_state;
  Trajectory trajectory;
  TdvpDiagnostics diagnostics;
};

/// MPO slices are compressed to this relative Frobenius tolerance.
inline constexpr double kMpoTolerance = 1e-12;

TdvpResult evolve_tdvp(const PulseSequence& seq, const EmulatorConfig& config, const KrylovOptions& krylov = {});

}  // namespace rydemu
