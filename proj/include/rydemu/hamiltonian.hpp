#pragma once

// Rydberg Hamiltonian of one piecewise-constant time slice:
//
//   H = Σ_i (Ω_i/2)(σx_i cos φ_i + σy_i sin φ_i) − Σ_i δ_i n_i + Σ_{i<j} V_ij n_i n_j,
//   V_ij = C / |r_ij|⁶,  n = |1⟩⟨1|.
//
// Basis states are indexed with qubit 0 as the most significant bit, so for
// two qubits the order is 00, 01, 10, 11.

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "rydemu/pulse_ir.hpp"

namespace rydemu {

using cplx = std::complex<double>;

/// Symmetric N×N matrix of V_ij in rad/μs with a zero diagonal.
/// Throws DegenerateRegister if two atoms coincide.
Eigen::MatrixXd interaction_matrix(const Register& reg, double interaction_coeff);

/// Distance at which C/r⁶ equals Ω.
double blockade_radius(double interaction_coeff, double omega);

struct HamiltonianSlice {
  Eigen::VectorXd omega;  // rad/μs
  Eigen::VectorXd delta;  // rad/μs
  Eigen::VectorXd phase;  // rad
  Eigen::MatrixXd interactions;

  std::size_t size() const noexcept { return static_cast<std::size_t>(omega.size()); }
  /// A slice with all controls zero.
  static HamiltonianSlice idle(const Eigen::MatrixXd& interactions);
};

/// Largest qubit count the full-Hilbert-space routines accept.
inline constexpr int kMaxDenseQubits = 16;

/// The slice Hamiltonian on the full 2^N space, stored sparse (it has at
/// most N+1 non-zeros per row). Throws TooLarge for N > 16.
Eigen::SparseMatrix<cplx> dense_hamiltonian(const HamiltonianSlice& slice);

/// Piecewise-constant slices of a sequence. Slice k covers
/// [k·dt, min((k+1)·dt, T)) and carries controls averaged over that window.
class SliceSchedule {
 public:
  SliceSchedule(const PulseSequence& seq, std::int64_t dt_ns, double interaction_coeff);

  std::size_t size() const noexcept { return bounds_.size(); }
  HamiltonianSlice operator[](std::size_t k) const;
  /// Length of slice k in ns.
  std::int64_t duration_ns(std::size_t k) const { return bounds_[k].second - bounds_[k].first; }
  std::int64_t end_ns(std::size_t k) const { return bounds_[k].second; }
  const Eigen::MatrixXd& interactions() const noexcept { return interactions_; }

 private:
  QubitControls controls_;
  Eigen::MatrixXd interactions_;
  std::vector<std::pair<std::int64_t, std::int64_t>> bounds_;
};

/// Chain order for the matrix-product representations: element k is the
/// qubit placed at chain site k. Registers whose atoms lie on a rectangular
/// grid are traversed row by row in a snake; any other layout uses a greedy
/// nearest-neighbour path from the leftmost atom.
std::vector<int> chain_ordering(const Register& reg);

/// One MPO site: a wl×wr grid of 2×2 local operators, block (a, b) stored at
/// a*wr + b. Operator element (s_out, s_in) acts as ⟨s_out|op|s_in⟩.
struct MpoSite {
  int left_dim = 1;
  int right_dim = 1;
  std::vector<Eigen::Matrix2cd> blocks;

  Eigen::Matrix2cd& at(int a, int b) { return blocks[static_cast<std::size_t>(a * right_dim + b)]; }
  const Eigen::Matrix2cd& at(int a, int b) const { return blocks[static_cast<std::size_t>(a * right_dim + b)]; }
  bool is_zero(int a, int b) const { return at(a, b).isZero(0.0); }
};

class Mpo {
 public:
  Mpo() = default;
  Mpo(std::vector<MpoSite> sites, std::vector<int> ordering);

  std::size_t size() const noexcept { return sites_.size(); }
  const MpoSite& site(std::size_t k) const { return sites_[k]; }
  const std::vector<int>& ordering() const noexcept { return ordering_; }
  std::vector<int> bond_dims() const;
  int max_bond_dim() const;

  /// Full contraction in qubit order (the same basis as dense_hamiltonian).
  /// Throws TooLarge above 12 sites.
  Eigen::MatrixXcd to_dense() const;

 private:
  std::vector<MpoSite> sites_;
  std::vector<int> ordering_;
};

/// Builds the exact sum-of-terms MPO of a slice in the given chain order and
/// recompresses it by SVD so that the relative Frobenius error stays below
/// `tol`. Throws CompressionFailure if that needs a bond above `max_bond`.
Mpo rydberg_mpo(const HamiltonianSlice& slice, const std::vector<int>& ordering, double tol = 1e-12,
                int max_bond = 256);

/// Debug dump: {"format":"rydemu-mpo","version":1,"ordering":[...],
/// "sites":[{"left_dim","right_dim","re":[...],"im":[...]}]} with element
/// ((a*wr + b)*2 + s_out)*2 + s_in.
void write_mpo_json(std::ostream& out, const Mpo& mpo);

}  // namespace rydemu
