#pragma once

// Figures of merit computed from samples and trajectories: unit-disk graphs
// and independent sets, crystal order, and plot-ready CSV tables.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rydemu/exact_solver.hpp"
#include "rydemu/pulse_ir.hpp"

namespace rydemu {

struct UDGraph {
  std::vector<std::string> nodes;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted

  std::size_t size() const noexcept { return nodes.size(); }
  /// Neighbour bitmask per node (graphs up to 64 nodes).
  std::vector<std::uint64_t> adjacency() const;
};

/// Edge between i and j iff |r_i − r_j| < radius (ties are not edges).
UDGraph ud_graph(const Register& reg, double radius_um);

/// Throws LengthMismatch when the bitstring length differs from the node count.
bool is_independent(const UDGraph& g, std::string_view bits);

struct MisSolution {
  int size = 0;
  std::vector<int> nodes;  // ascending
};

inline constexpr std::size_t kMaxMisNodes = 24;

/// Exact maximum independent set by branch and bound. Throws TooLarge
/// above kMaxMisNodes.
MisSolution brute_force_mis(const UDGraph& g);

struct MisStatistics {
  /// Mean set size over independent samples; 0 when there are none.
  double mean_size = 0.0;
  double fraction_independent = 0.0;
  int best_size = 0;
  std::int64_t total = 0;
};

MisStatistics mis_statistics(const Counts& counts, const UDGraph& g);

/// Sublattice contrast for period n, maximised over the n offsets and
/// clipped to [0, 1].
double crystal_order_score(const Eigen::VectorXd& probs, int period);

/// bitstring,count sorted by descending count then bitstring.
void write_histogram_csv(std::ostream& out, const Counts& counts);
/// time_ns,site,n_expectation
void write_heatmap_csv(std::ostream& out, const Trajectory& trajectory);

struct SweepPoint {
  double value = 0.0;
  MisStatistics stats;
};

/// parameter,value,mean_size,fraction_independent,best_size
void write_sweep_csv(std::ostream& out, std::string_view parameter, const std::vector<SweepPoint>& points);

}  // namespace rydemu
