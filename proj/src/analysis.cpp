#include "rydemu/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>

#include "rydemu/errors.hpp"

namespace rydemu {

std::vector<std::uint64_t> UDGraph::adjacency() const {
  if (nodes.size() > 64) throw TooLarge("adjacency masks need at most 64 nodes");
  std::vector<std::uint64_t> adj(nodes.size(), 0);
  for (const auto& [i, j] : edges) {
    adj[i] |= std::uint64_t{1} << j;
    adj[j] |= std::uint64_t{1} << i;
  }
  return adj;
}

UDGraph ud_graph(const Register& reg, double radius_um) {
  UDGraph g;
  g.nodes = reg.qubit_ids;
  const int n = static_cast<int>(reg.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = reg.positions[i].x_um - reg.positions[j].x_um;
      const double dy = reg.positions[i].y_um - reg.positions[j].y_um;
      if (std::hypot(dx, dy) < radius_um) g.edges.emplace_back(i, j);
    }
  return g;
}

bool is_independent(const UDGraph& g, std::string_view bits) {
  if (bits.size() != g.size())
    throw LengthMismatch("bitstring has " + std::to_string(bits.size()) + " sites, graph has " +
                         std::to_string(g.size()));
  for (const auto& [i, j] : g.edges)
    if (bits[i] == '1' && bits[j] == '1') return false;
  return true;
}

namespace {

struct MisSearch {
  const std::vector<std::uint64_t>& adj;
  std::uint64_t best_set = 0;
  int best = 0;

  // Branch on the highest-degree candidate: either take it (dropping its
  // neighbours) or discard it. Bound by current size plus remaining count.
  void run(std::uint64_t chosen, int size, std::uint64_t candidates) {
    if (candidates == 0) {
      if (size > best) {
        best = size;
        best_set = chosen;
      }
      return;
    }
    if (size + std::popcount(candidates) <= best) return;

    int pick = -1;
    int pick_degree = -1;
    for (std::uint64_t c = candidates; c; c &= c - 1) {
      const int v = std::countr_zero(c);
      const int d = std::popcount(adj[v] & candidates);
      if (d == 0) {
        // Isolated vertices always belong to some maximum set.
        run(chosen | (std::uint64_t{1} << v), size + 1, candidates & ~(std::uint64_t{1} << v));
        return;
      }
      if (d > pick_degree) {
        pick = v;
        pick_degree = d;
      }
    }
    const std::uint64_t bit = std::uint64_t{1} << pick;
    run(chosen | bit, size + 1, candidates & ~bit & ~adj[pick]);
    run(chosen, size, candidates & ~bit);
  }
};

}  // namespace

MisSolution brute_force_mis(const UDGraph& g) {
  if (g.size() > kMaxMisNodes)
    throw TooLarge("exact MIS supports at most " + std::to_string(kMaxMisNodes) + " nodes, got " +
                   std::to_string(g.size()));
  const auto adj = g.adjacency();
  MisSearch search{adj};
  const std::uint64_t all = g.size() == 0 ? 0 : (std::uint64_t{1} << g.size()) - 1;
  search.run(0, 0, all);
  MisSolution out;
  out.size = search.best;
  for (std::uint64_t c = search.best_set; c; c &= c - 1) out.nodes.push_back(std::countr_zero(c));
  return out;
}

MisStatistics mis_statistics(const Counts& counts, const UDGraph& g) {
  MisStatistics s;
  std::int64_t independent = 0;
  double size_sum = 0.0;
  for (const auto& [bits, count] : counts) {
    s.total += count;
    if (!is_independent(g, bits)) continue;
    const int k = static_cast<int>(std::count(bits.begin(), bits.end(), '1'));
    independent += count;
    size_sum += static_cast<double>(k) * static_cast<double>(count);
    if (count > 0) s.best_size = std::max(s.best_size, k);
  }
  if (independent > 0) s.mean_size = size_sum / static_cast<double>(independent);
  if (s.total > 0) s.fraction_independent = static_cast<double>(independent) / static_cast<double>(s.total);
  return s;
}

double crystal_order_score(const Eigen::VectorXd& probs, int period) {
  if (period < 2) throw InvalidLength("crystal period must be at least 2");
  const Eigen::Index n = probs.size();
  double best = 0.0;
  for (int offset = 0; offset < period; ++offset) {
    double on = 0.0, off = 0.0;
    int n_on = 0, n_off = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i % period == offset) {
        on += probs(i);
        ++n_on;
      } else {
        off += probs(i);
        ++n_off;
      }
    }
    if (n_on == 0) continue;
    const double contrast = on / n_on - (n_off > 0 ? off / n_off : 0.0);
    best = std::max(best, contrast);
  }
  return std::clamp(best, 0.0, 1.0);
}

void write_histogram_csv(std::ostream& out, const Counts& counts) {
  std::vector<std::pair<std::string, std::int64_t>> rows(counts.begin(), counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  out << "bitstring,count\n";
  for (const auto& [bits, count] : rows) out << bits << ',' << count << '\n';
}

void write_heatmap_csv(std::ostream& out, const Trajectory& trajectory) {
  const auto old = out.precision(12);
  out << "time_ns,site,n_expectation\n";
  for (std::size_t k = 0; k < trajectory.times_ns.size(); ++k)
    for (Eigen::Index q = 0; q < trajectory.excitation[k].size(); ++q)
      out << trajectory.times_ns[k] << ',' << q << ',' << trajectory.excitation[k](q) << '\n';
  out.precision(old);
}

void write_sweep_csv(std::ostream& out, std::string_view parameter, const std::vector<SweepPoint>& points) {
  const auto old = out.precision(12);
  out << "parameter,value,mean_size,fraction_independent,best_size\n";
  for (const auto& p : points)
    out << parameter << ',' << p.value << ',' << p.stats.mean_size << ',' << p.stats.fraction_independent << ','
        << p.stats.best_size << '\n';
  out.precision(old);
}

}  // namespace rydemu
