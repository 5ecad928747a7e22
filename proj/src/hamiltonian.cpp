#include "rydemu/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "rydemu/errors.hpp"

namespace rydemu {

Eigen::MatrixXd interaction_matrix(const Register& reg, double interaction_coeff) {
  const auto n = static_cast<Eigen::Index>(reg.size());
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      const auto& a = reg.positions[static_cast<std::size_t>(i)];
      const auto& b = reg.positions[static_cast<std::size_t>(j)];
      const double dx = a.x_um - b.x_um;
      const double dy = a.y_um - b.y_um;
      const double r2 = dx * dx + dy * dy;
      if (r2 == 0.0)
        throw DegenerateRegister("qubits '" + reg.qubit_ids[static_cast<std::size_t>(j)] + "' and '" +
                                 reg.qubit_ids[static_cast<std::size_t>(i)] + "' coincide");
      v(i, j) = v(j, i) = interaction_coeff / (r2 * r2 * r2);
    }
  return v;
}

double blockade_radius(double interaction_coeff, double omega) {
  if (!(omega > 0.0)) throw NonpositiveOmega("blockade radius needs a positive Rabi frequency");
  return std::pow(interaction_coeff / omega, 1.0 / 6.0);
}

HamiltonianSlice HamiltonianSlice::idle(const Eigen::MatrixXd& interactions) {
  const auto n = interactions.rows();
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), interactions};
}

Eigen::SparseMatrix<cplx> dense_hamiltonian(const HamiltonianSlice& slice) {
  const int n = static_cast<int>(slice.size());
  if (n > kMaxDenseQubits) throw TooLarge(std::to_string(n) + " qubits exceed the dense limit of 16");
  const std::int64_t dim = std::int64_t{1} << n;
  std::vector<Eigen::Triplet<cplx>> triplets;
  triplets.reserve(static_cast<std::size_t>(dim * (n + 1)));
  for (std::int64_t x = 0; x < dim; ++x) {
    double diag = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!((x >> (n - 1 - i)) & 1)) continue;
      diag -= slice.delta(i);
      for (int j = i + 1; j < n; ++j)
        if ((x >> (n - 1 - j)) & 1) diag += slice.interactions(i, j);
    }
    if (diag != 0.0) triplets.emplace_back(x, x, diag);
    for (int i = 0; i < n; ++i) {
      if (slice.omega(i) == 0.0) continue;
      const std::int64_t bit = std::int64_t{1} << (n - 1 - i);
      const std::int64_t y = x ^ bit;
      // ⟨1|h|0⟩ = Ω/2 e^{iφ}, ⟨0|h|1⟩ = Ω/2 e^{-iφ}
      const double sign = (x & bit) ? -1.0 : 1.0;
      triplets.emplace_back(y, x, std::polar(slice.omega(i) / 2.0, sign * slice.phase(i)));
    }
  }
  Eigen::SparseMatrix<cplx> h(dim, dim);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

// ---------------------------------------------------------------------------

SliceSchedule::SliceSchedule(const PulseSequence& seq, std::int64_t dt_ns, double interaction_coeff)
    : controls_(qubit_controls(seq)), interactions_(interaction_matrix(seq.reg, interaction_coeff)) {
  if (dt_ns < 1) throw Error("time step must be at least 1 ns");
  const std::int64_t total = controls_.duration_ns();
  for (std::int64_t t = 0; t < total; t += dt_ns) bounds_.emplace_back(t, std::min(t + dt_ns, total));
}

HamiltonianSlice SliceSchedule::operator[](std::size_t k) const {
  const auto [begin, end] = bounds_.at(k);
  const auto len = static_cast<Eigen::Index>(end - begin);
  const auto n = controls_.drive.cols();
  const Eigen::VectorXcd drive = controls_.drive.middleRows(begin, len).colwise().mean().transpose();
  HamiltonianSlice slice;
  slice.omega = drive.cwiseAbs();
  slice.phase.resize(n);
  for (Eigen::Index q = 0; q < n; ++q) slice.phase(q) = std::arg(drive(q));
  slice.delta = controls_.detuning.middleRows(begin, len).colwise().mean().transpose();
  slice.interactions = interactions_;
  return slice;
}

// ---------------------------------------------------------------------------

std::vector<int> chain_ordering(const Register& reg) {
  const int n = static_cast<int>(reg.size());
  constexpr double kTol = 1e-6;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= 1) return idx;

  // Group atoms into rows of equal y, each sorted by x.
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const auto& pa = reg.positions[static_cast<std::size_t>(a)];
    const auto& pb = reg.positions[static_cast<std::size_t>(b)];
    if (std::abs(pa.y_um - pb.y_um) > kTol) return pa.y_um < pb.y_um;
    return pa.x_um < pb.x_um;
  });
  std::vector<std::vector<int>> rows;
  for (int q : idx) {
    if (rows.empty() ||
        std::abs(reg.positions[static_cast<std::size_t>(rows.back().front())].y_um -
                 reg.positions[static_cast<std::size_t>(q)].y_um) > kTol)
      rows.emplace_back();
    rows.back().push_back(q);
  }
  bool grid = true;
  for (const auto& row : rows) {
    if (row.size() != rows.front().size()) {
      grid = false;
      break;
    }
    for (std::size_t c = 0; c < row.size(); ++c)
      if (std::abs(reg.positions[static_cast<std::size_t>(row[c])].x_um -
                   reg.positions[static_cast<std::size_t>(rows.front()[c])].x_um) > kTol)
        grid = false;
  }
  if (grid) {
    std::vector<int> order;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r % 2 == 0) order.insert(order.end(), rows[r].begin(), rows[r].end());
      else order.insert(order.end(), rows[r].rbegin(), rows[r].rend());
    }
    return order;
  }

  // Greedy nearest-neighbour path.
  auto dist2 = [&](int a, int b) {
    const auto& pa = reg.positions[static_cast<std::size_t>(a)];
    const auto& pb = reg.positions[static_cast<std::size_t>(b)];
    return (pa.x_um - pb.x_um) * (pa.x_um - pb.x_um) + (pa.y_um - pb.y_um) * (pa.y_um - pb.y_um);
  };
  int start = 0;
  for (int q = 1; q < n; ++q) {
    const auto& p = reg.positions[static_cast<std::size_t>(q)];
    const auto& s = reg.positions[static_cast<std::size_t>(start)];
    if (p.x_um < s.x_um - kTol || (std::abs(p.x_um - s.x_um) <= kTol && p.y_um < s.y_um)) start = q;
  }
  std::vector<int> order{start};
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  used[static_cast<std::size_t>(start)] = true;
  while (static_cast<int>(order.size()) < n) {
    int best = -1;
    for (int q = 0; q < n; ++q) {
      if (used[static_cast<std::size_t>(q)]) continue;
      if (best < 0 || dist2(order.back(), q) < dist2(order.back(), best)) best = q;
    }
    used[static_cast<std::size_t>(best)] = true;
    order.push_back(best);
  }
  return order;
}

// ---------------------------------------------------------------------------
// MPO

Mpo::Mpo(std::vector<MpoSite> sites, std::vector<int> ordering)
    : sites_(std::move(sites)), ordering_(std::move(ordering)) {}

std::vector<int> Mpo::bond_dims() const {
  std::vector<int> dims;
  for (std::size_t k = 0; k + 1 < sites_.size(); ++k) dims.push_back(sites_[k].right_dim);
  return dims;
}

int Mpo::max_bond_dim() const {
  int m = 1;
  for (const auto& s : sites_) m = std::max(m, s.right_dim);
  return m;
}

Eigen::MatrixXcd Mpo::to_dense() const {
  const int n = static_cast<int>(sites_.size());
  if (n > 12) throw TooLarge("MPO contraction is limited to 12 sites");
  // acc[b] is the partial operator on chain sites 0..k with open bond b.
  std::vector<Eigen::MatrixXcd> acc(1, Eigen::MatrixXcd::Ones(1, 1));
  for (const auto& site : sites_) {
    const auto dim = acc.front().rows();
    std::vector<Eigen::MatrixXcd> next(static_cast<std::size_t>(site.right_dim),
                                       Eigen::MatrixXcd::Zero(dim * 2, dim * 2));
    for (int a = 0; a < site.left_dim; ++a)
      for (int b = 0; b < site.right_dim; ++b) {
        const auto& op = site.at(a, b);
        if (op.isZero(0.0)) continue;
        auto& dst = next[static_cast<std::size_t>(b)];
        for (int so = 0; so < 2; ++so)
          for (int si = 0; si < 2; ++si)
            if (op(so, si) != cplx(0.0))
              for (Eigen::Index r = 0; r < dim; ++r)
                for (Eigen::Index c = 0; c < dim; ++c)
                  dst(r * 2 + so, c * 2 + si) += acc[static_cast<std::size_t>(a)](r, c) * op(so, si);
      }
    acc = std::move(next);
  }
  const Eigen::MatrixXcd& chain = acc.front();
  const std::int64_t dim = std::int64_t{1} << n;
  std::vector<std::int64_t> perm(static_cast<std::size_t>(dim));
  for (std::int64_t x = 0; x < dim; ++x) {
    std::int64_t y = 0;
    for (int k = 0; k < n; ++k)
      if ((x >> (n - 1 - k)) & 1) y |= std::int64_t{1} << (n - 1 - ordering_[static_cast<std::size_t>(k)]);
    perm[static_cast<std::size_t>(x)] = y;
  }
  Eigen::MatrixXcd out(dim, dim);
  for (std::int64_t r = 0; r < dim; ++r)
    for (std::int64_t c = 0; c < dim; ++c)
      out(perm[static_cast<std::size_t>(r)], perm[static_cast<std::size_t>(c)]) = chain(r, c);
  return out;
}

namespace {

// Site tensor T(a, p, b) with p = s_out*2 + s_in, held as a wl×(4·wr)
// "right" matrix, column p*wr + b.
struct RawSite {
  Eigen::MatrixXcd m;
  int wl = 1;
  int wr = 1;
};

Eigen::MatrixXcd left_matrix(const RawSite& s) {
  // (4·wl)×wr, row p*wl + a
  Eigen::MatrixXcd out(4 * s.wl, s.wr);
  for (int p = 0; p < 4; ++p) out.middleRows(p * s.wl, s.wl) = s.m.middleCols(p * s.wr, s.wr);
  return out;
}

RawSite from_left_matrix(const Eigen::MatrixXcd& lm, int wl) {
  RawSite s{Eigen::MatrixXcd(wl, 4 * lm.cols()), wl, static_cast<int>(lm.cols())};
  for (int p = 0; p < 4; ++p) s.m.middleCols(p * s.wr, s.wr) = lm.middleRows(p * wl, wl);
  return s;
}

std::vector<RawSite> exact_sites(const HamiltonianSlice& slice, const std::vector<int>& ordering) {
  const int n = static_cast<int>(ordering.size());
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  Eigen::Matrix2cd occ = Eigen::Matrix2cd::Zero();
  occ(1, 1) = 1.0;

  std::vector<RawSite> sites;
  for (int k = 0; k < n; ++k) {
    const int q = ordering[static_cast<std::size_t>(k)];
    Eigen::Matrix2cd local = Eigen::Matrix2cd::Zero();
    local(1, 0) = std::polar(slice.omega(q) / 2.0, slice.phase(q));
    local(0, 1) = std::conj(local(1, 0));
    local(1, 1) = -slice.delta(q);

    // Bond between chain sites k and k+1 carries: 0 = nothing placed yet,
    // 1..k+1 = n open on chain site j-1, k+2 = complete.
    const bool first = k == 0;
    const bool last = k == n - 1;
    const int wl = first ? 1 : k + 2;
    const int wr = last ? 1 : k + 3;
    const int l_start = 0;
    const int l_done = first ? -1 : k + 1;
    const int r_start = last ? -1 : 0;
    const int r_done = last ? 0 : k + 2;

    std::vector<Eigen::Matrix2cd> blocks(static_cast<std::size_t>(wl * wr), Eigen::Matrix2cd::Zero());
    auto at = [&](int a, int b) -> Eigen::Matrix2cd& { return blocks[static_cast<std::size_t>(a * wr + b)]; };
    if (r_start >= 0) {
      at(l_start, r_start) = id;
      at(l_start, k + 1) = occ;
    }
    at(l_start, r_done) += local;
    for (int j = 0; j < k; ++j) {
      const int open = j + 1;
      if (!last) at(open, open) = id;
      const double v = slice.interactions(ordering[static_cast<std::size_t>(j)], q);
      at(open, r_done) = v * occ;
    }
    if (l_done >= 0) at(l_done, r_done) += id;

    RawSite s{Eigen::MatrixXcd::Zero(wl, 4 * wr), wl, wr};
    for (int a = 0; a < wl; ++a)
      for (int b = 0; b < wr; ++b)
        for (int p = 0; p < 4; ++p) s.m(a, p * wr + b) = at(a, b)(p / 2, p % 2);
    sites.push_back(std::move(s));
  }
  return sites;
}

void compress(std::vector<RawSite>& sites, double tol, int max_bond) {
  const std::size_t n = sites.size();
  if (n < 2) return;
  // Left-orthonormalise so that the whole weight sits on the last site.
  for (std::size_t k = 0; k + 1 < n; ++k) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(left_matrix(sites[k]));
    const auto rows = 4 * sites[k].wl;
    const auto rank = std::min<Eigen::Index>(rows, sites[k].wr);
    Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(rows, rank);
    Eigen::MatrixXcd r = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
    sites[k] = from_left_matrix(q, sites[k].wl);
    RawSite& next = sites[k + 1];
    next.m = r * next.m;
    next.wl = static_cast<int>(rank);
  }
  const double total = sites.back().m.squaredNorm();
  const double per_cut = tol * tol * total / static_cast<double>(n - 1);
  for (std::size_t k = n - 1; k > 0; --k) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(sites[k].m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::Index keep = sv.size();
    double discarded = 0.0;
    while (keep > 1 && discarded + sv(keep - 1) * sv(keep - 1) <= per_cut) {
      discarded += sv(keep - 1) * sv(keep - 1);
      --keep;
    }
    if (keep > max_bond)
      throw CompressionFailure("MPO bond " + std::to_string(k) + " needs dimension " + std::to_string(keep) +
                               " above the cap " + std::to_string(max_bond));
    sites[k].m = svd.matrixV().leftCols(keep).adjoint();
    sites[k].wl = static_cast<int>(keep);
    Eigen::MatrixXcd us = svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal();
    Eigen::MatrixXcd lm = left_matrix(sites[k - 1]) * us;
    sites[k - 1] = from_left_matrix(lm, sites[k - 1].wl);
  }
}

}  // namespace

Mpo rydberg_mpo(const HamiltonianSlice& slice, const std::vector<int>& ordering, double tol, int max_bond) {
  if (!(tol > 0.0)) throw Error("MPO tolerance must be positive");
  if (ordering.size() != slice.size()) throw LengthMismatch("ordering length differs from qubit count");
  std::vector<RawSite> raw = exact_sites(slice, ordering);
  compress(raw, tol, max_bond);

  std::vector<MpoSite> sites;
  sites.reserve(raw.size());
  for (const auto& r : raw) {
    MpoSite s;
    s.left_dim = r.wl;
    s.right_dim = r.wr;
    s.blocks.assign(static_cast<std::size_t>(r.wl * r.wr), Eigen::Matrix2cd::Zero());
    for (int a = 0; a < r.wl; ++a)
      for (int b = 0; b < r.wr; ++b)
        for (int p = 0; p < 4; ++p) s.at(a, b)(p / 2, p % 2) = r.m(a, p * r.wr + b);
    sites.push_back(std::move(s));
  }
  return Mpo(std::move(sites), ordering);
}

void write_mpo_json(std::ostream& out, const Mpo& mpo) {
  nlohmann::json doc;
  doc["format"] = "rydemu-mpo";
  doc["version"] = 1;
  doc["ordering"] = mpo.ordering();
  nlohmann::json sites = nlohmann::json::array();
  for (std::size_t k = 0; k < mpo.size(); ++k) {
    const auto& s = mpo.site(k);
    std::vector<double> re, im;
    for (int a = 0; a < s.left_dim; ++a)
      for (int b = 0; b < s.right_dim; ++b)
        for (int so = 0; so < 2; ++so)
          for (int si = 0; si < 2; ++si) {
            re.push_back(s.at(a, b)(so, si).real());
            im.push_back(s.at(a, b)(so, si).imag());
          }
    sites.push_back({{"left_dim", s.left_dim}, {"right_dim", s.right_dim}, {"re", re}, {"im", im}});
  }
  doc["sites"] = std::move(sites);
  out << doc.dump() << '\n';
}

}  // namespace rydemu
