#pragma once

// Dense state-vector propagation, the reference for small registers.

#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rydemu/hamiltonian.hpp"
#include "rydemu/krylov.hpp"
#include "rydemu/pulse_ir.hpp"

namespace rydemu {

/// Bitstring (qubit order, '1' = Rydberg) to number of shots.
using Counts = std::map<std::string, std::int64_t>;

struct StateVector {
  Eigen::VectorXcd amplitudes;
  int num_qubits = 0;

  /// Computational basis state; qubit 0 is the most significant bit.
  static StateVector basis(std::string_view bits);
  double norm() const { return amplitudes.norm(); }
};

/// Per-site ⟨n⟩ after each slice; row 0 is t = 0.
struct Trajectory {
  std::vector<double> times_ns;
  std::vector<Eigen::VectorXd> excitation;
};

struct ExactResult {
  StateVector final_state;
  Trajectory trajectory;
  double max_norm_deviation = 0.0;
};

/// Applies exp(−i H_k dt_k) slice by slice. Throws TooLarge above 16 qubits.
ExactResult evolve_exact(const PulseSequence& seq, const EmulatorConfig& config,
                         const KrylovOptions& krylov = {});

/// One propagation step exp(−i H τ)ψ with τ in μs, matrix-free.
Eigen::VectorXcd propagate_slice(const HamiltonianSlice& slice, const Eigen::VectorXcd& psi, double tau_us,
                                 const KrylovOptions& krylov = {});

/// ⟨ψ|H|ψ⟩ for a slice Hamiltonian.
double energy(const HamiltonianSlice& slice, const StateVector& state);

Eigen::VectorXd excitation_probabilities(const StateVector& state);

/// Inverse-CDF sampling of |c_s|² with mt19937_64 seeded by `seed`.
Counts sample_dense(const StateVector& state, std::int64_t runs, std::uint64_t seed);

/// Name of the generator recorded alongside every set of samples.
inline constexpr std::string_view kRngName = "mt19937_64";

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
double uniform01(std::uint64_t draw) noexcept;

}  // namespace rydemu
