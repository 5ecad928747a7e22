#pragma once

// Matrix-product state of N two-level sites in chain order.
//
// Site k holds two χ_{k}×χ_{k+1} matrices, one per physical value s ∈ {0, 1}
// (1 is the Rydberg state). The chain order maps onto qubits through
// `ordering()`: chain site k is qubit ordering()[k]. Bitstrings and dense
// vectors handed in or out are always in qubit order.

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rydemu/exact_solver.hpp"

namespace rydemu {

using SiteTensor = std::array<Eigen::MatrixXcd, 2>;

struct TruncationPolicy {
  double epsilon = 1e-10;
  int max_bond_dim = 400;
};

/// Singular values below this fraction of the largest are always dropped.
inline constexpr double kSingularValueFloor = 1e-14;

class Mps {
 public:
  Mps() = default;
  Mps(std::vector<SiteTensor> sites, std::vector<int> ordering, int center);

  /// Throws InvalidLength for an empty bitstring.
  static Mps product_state(std::string_view bits, std::vector<int> ordering = {});
  /// Exact MPS of a dense state by successive SVDs (no truncation beyond
  /// numerical zeros). Throws TooLarge above 16 qubits.
  static Mps from_dense(const StateVector& state, std::vector<int> ordering = {});

  std::size_t size() const noexcept { return sites_.size(); }
  const std::vector<int>& ordering() const noexcept { return ordering_; }
  int center() const noexcept { return center_; }

  SiteTensor& site(std::size_t k) { return sites_[k]; }
  const SiteTensor& site(std::size_t k) const { return sites_[k]; }
  int left_dim(std::size_t k) const { return static_cast<int>(sites_[k][0].rows()); }
  int right_dim(std::size_t k) const { return static_cast<int>(sites_[k][0].cols()); }
  std::vector<int> bond_dims() const;
  int max_bond_dim() const;

  /// Moves the orthogonality center with QR decompositions.
  void move_center(int k);
  void set_center(int k) noexcept { center_ = k; }
  double norm() const;
  void normalize();

  /// Deviation of Σ_s A[s]†A[s] (left) or Σ_s A[s]A[s]† (right) from the
  /// identity, maximum over the sites that should be orthonormal.
  double canonical_error() const;

 private:
  std::vector<SiteTensor> sites_;
  std::vector<int> ordering_;
  int center_ = 0;
};

/// θ for sites (k, k+1): a (2χl)×(2χr) matrix, row s1·χl + α, column s2·χr + β.
Eigen::MatrixXcd two_site_theta(const SiteTensor& left, const SiteTensor& right);

struct TwoSiteSplit {
  SiteTensor left;
  SiteTensor right;
  double discarded_weight = 0.0;  // relative to Σλ²
  double kept_norm = 0.0;         // ‖θ‖ after truncation, before renormalising
  Eigen::VectorXd singular_values;
};

enum class Absorb { right, left };

/// SVD split of θ keeping the fewest values with discarded weight below
/// policy.epsilon and at most policy.max_bond_dim; singular values are
/// normalised so the kept ones have unit weight and absorbed on one side.
TwoSiteSplit truncate_two_site(const Eigen::MatrixXcd& theta, int chi_left, int chi_right,
                               const TruncationPolicy& policy, Absorb absorb = Absorb::right);

/// ⟨ψ|op_site|ψ⟩ for a site given in qubit numbering.
double expectation_local(const Mps& mps, const Eigen::Matrix2cd& op, int qubit);
/// ⟨n_q⟩ for every qubit, in qubit order.
Eigen::VectorXd excitation_probabilities(const Mps& mps);

/// Sequential conditional sampling from the exact Born distribution.
Counts sample(const Mps& mps, std::int64_t runs, std::uint64_t seed);

StateVector to_dense(const Mps& mps);
/// ⟨a|b⟩. Throws LengthMismatch when sizes or orderings differ.
cplx inner(const Mps& a, const Mps& b);

/// Binary container, little-endian:
///   "RMPS" | u32 version=1 | u32 N | u32 center | u32 ordering[N] |
///   per site: u32 χl, u32 χr, then f64 (re, im) for s=0 then s=1,
///   each matrix column-major.
void write_mps(std::ostream& out, const Mps& mps);
Mps read_mps(std::istream& in);

}  // namespace rydemu
