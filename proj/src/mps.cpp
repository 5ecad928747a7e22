#include "rydemu/mps.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "rydemu/errors.hpp"

namespace rydemu {

namespace {

std::vector<int> identity_ordering(std::size_t n) {
  std::vector<int> o(n);
  std::iota(o.begin(), o.end(), 0);
  return o;
}

void check_ordering(const std::vector<int>& ordering, std::size_t n) {
  if (ordering.size() != n) throw LengthMismatch("ordering length differs from site count");
  std::vector<bool> seen(n, false);
  for (int q : ordering) {
    if (q < 0 || static_cast<std::size_t>(q) >= n || seen[static_cast<std::size_t>(q)])
      throw LengthMismatch("ordering is not a permutation");
    seen[static_cast<std::size_t>(q)] = true;
  }
}

// Chain-order basis index to qubit-order basis index.
std::vector<std::int64_t> chain_to_qubit_index(const std::vector<int>& ordering) {
  const int n = static_cast<int>(ordering.size());
  const std::int64_t dim = std::int64_t{1} << n;
  std::vector<std::int64_t> perm(static_cast<std::size_t>(dim));
  for (std::int64_t x = 0; x < dim; ++x) {
    std::int64_t y = 0;
    for (int k = 0; k < n; ++k)
      if ((x >> (n - 1 - k)) & 1) y |= std::int64_t{1} << (n - 1 - ordering[static_cast<std::size_t>(k)]);
    perm[static_cast<std::size_t>(x)] = y;
  }
  return perm;
}

// (2χl)×χr, row s·χl + α
Eigen::MatrixXcd stack_rows(const SiteTensor& t) {
  const auto l = t[0].rows();
  Eigen::MatrixXcd m(2 * l, t[0].cols());
  m.topRows(l) = t[0];
  m.bottomRows(l) = t[1];
  return m;
}

// χl×(2χr), column s·χr + β
Eigen::MatrixXcd stack_cols(const SiteTensor& t) {
  const auto r = t[0].cols();
  Eigen::MatrixXcd m(t[0].rows(), 2 * r);
  m.leftCols(r) = t[0];
  m.rightCols(r) = t[1];
  return m;
}

Eigen::MatrixXcd transfer(const SiteTensor& bra, const Eigen::MatrixXcd& env, const SiteTensor& ket) {
  return bra[0].adjoint() * env * ket[0] + bra[1].adjoint() * env * ket[1];
}

}  // namespace

Mps::Mps(std::vector<SiteTensor> sites, std::vector<int> ordering, int center)
    : sites_(std::move(sites)), ordering_(std::move(ordering)), center_(center) {
  if (ordering_.empty()) ordering_ = identity_ordering(sites_.size());
  check_ordering(ordering_, sites_.size());
}

Mps Mps::product_state(std::string_view bits, std::vector<int> ordering) {
  if (bits.empty()) throw InvalidLength("product state needs at least one site");
  if (ordering.empty()) ordering = identity_ordering(bits.size());
  check_ordering(ordering, bits.size());
  std::vector<SiteTensor> sites;
  for (int q : ordering) {
    const char c = bits[static_cast<std::size_t>(q)];
    if (c != '0' && c != '1') throw InvalidLength("bitstring may contain only 0 and 1");
    SiteTensor t{Eigen::MatrixXcd::Zero(1, 1), Eigen::MatrixXcd::Zero(1, 1)};
    t[c == '1' ? 1 : 0](0, 0) = 1.0;
    sites.push_back(std::move(t));
  }
  return Mps(std::move(sites), std::move(ordering), 0);
}

Mps Mps::from_dense(const StateVector& state, std::vector<int> ordering) {
  const int n = state.num_qubits;
  if (n < 1) throw InvalidLength("state has no qubits");
  if (n > kMaxDenseQubits) throw TooLarge("dense states are limited to 16 qubits");
  if (ordering.empty()) ordering = identity_ordering(static_cast<std::size_t>(n));
  check_ordering(ordering, static_cast<std::size_t>(n));
  const auto perm = chain_to_qubit_index(ordering);
  Eigen::MatrixXcd rest(1, std::int64_t{1} << n);
  for (std::size_t x = 0; x < perm.size(); ++x) rest(0, static_cast<Eigen::Index>(x)) = state.amplitudes(perm[x]);

  std::vector<SiteTensor> sites;
  for (int k = 0; k < n - 1; ++k) {
    const auto chi = rest.rows();
    const auto half = rest.cols() / 2;
    Eigen::MatrixXcd m(2 * chi, half);
    m.topRows(chi) = rest.leftCols(half);
    m.bottomRows(chi) = rest.rightCols(half);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::Index keep = 1;
    while (keep < sv.size() && sv(keep) > kSingularValueFloor * sv(0)) ++keep;
    const Eigen::MatrixXcd u = svd.matrixU().leftCols(keep);
    sites.push_back({u.topRows(chi), u.bottomRows(chi)});
    rest = sv.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).adjoint();
  }
  sites.push_back({rest.col(0), rest.col(1)});
  return Mps(std::move(sites), std::move(ordering), n - 1);
}

std::vector<int> Mps::bond_dims() const {
  std::vector<int> dims;
  for (std::size_t k = 0; k + 1 < sites_.size(); ++k) dims.push_back(right_dim(k));
  return dims;
}

int Mps::max_bond_dim() const {
  int m = 1;
  for (std::size_t k = 0; k + 1 < sites_.size(); ++k) m = std::max(m, right_dim(k));
  return m;
}

void Mps::move_center(int k) {
  if (k < 0 || static_cast<std::size_t>(k) >= sites_.size()) throw SiteOutOfRange("center out of range");
  while (center_ < k) {
    auto& a = sites_[static_cast<std::size_t>(center_)];
    const auto l = a[0].rows();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(stack_rows(a));
    const auto rows = 2 * l;
    const auto rank = std::min<Eigen::Index>(rows, a[0].cols());
    const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(rows, rank);
    const Eigen::MatrixXcd r = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
    a[0] = q.topRows(l);
    a[1] = q.bottomRows(l);
    auto& b = sites_[static_cast<std::size_t>(center_ + 1)];
    b[0] = r * b[0];
    b[1] = r * b[1];
    ++center_;
  }
  while (center_ > k) {
    auto& a = sites_[static_cast<std::size_t>(center_)];
    const auto r_dim = a[0].cols();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(stack_cols(a).adjoint());
    const auto rows = 2 * r_dim;
    const auto rank = std::min<Eigen::Index>(rows, a[0].rows());
    const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(rows, rank);
    const Eigen::MatrixXcd r = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
    const Eigen::MatrixXcd qh = q.adjoint();
    a[0] = qh.leftCols(r_dim);
    a[1] = qh.rightCols(r_dim);
    auto& b = sites_[static_cast<std::size_t>(center_ - 1)];
    const Eigen::MatrixXcd rh = r.adjoint();
    b[0] = b[0] * rh;
    b[1] = b[1] * rh;
    --center_;
  }
}

double Mps::norm() const { return std::sqrt(std::max(0.0, inner(*this, *this).real())); }

void Mps::normalize() {
  const double nrm = norm();
  if (nrm == 0.0) return;
  auto& c = sites_[static_cast<std::size_t>(center_)];
  c[0] /= nrm;
  c[1] /= nrm;
}

double Mps::canonical_error() const {
  double err = 0.0;
  for (std::size_t k = 0; k < sites_.size(); ++k) {
    const auto& a = sites_[k];
    if (static_cast<int>(k) < center_) {
      const Eigen::MatrixXcd g = a[0].adjoint() * a[0] + a[1].adjoint() * a[1];
      err = std::max(err, (g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    } else if (static_cast<int>(k) > center_) {
      const Eigen::MatrixXcd g = a[0] * a[0].adjoint() + a[1] * a[1].adjoint();
      err = std::max(err, (g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    }
  }
  return err;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXcd two_site_theta(const SiteTensor& left, const SiteTensor& right) {
  const auto l = left[0].rows();
  const auto r = right[0].cols();
  Eigen::MatrixXcd theta(2 * l, 2 * r);
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2)
      theta.block(s1 * l, s2 * r, l, r).noalias() = left[static_cast<std::size_t>(s1)] * right[static_cast<std::size_t>(s2)];
  return theta;
}

TwoSiteSplit truncate_two_site(const Eigen::MatrixXcd& theta, int chi_left, int chi_right,
                               const TruncationPolicy& policy, Absorb absorb) {
  if (theta.rows() != 2 * chi_left || theta.cols() != 2 * chi_right)
    throw LengthMismatch("theta shape does not match the bond dimensions");
  if (!theta.allFinite()) throw SvdFailure("theta contains non-finite values");
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw SvdFailure("SVD did not converge");
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!sv.allFinite()) throw SvdFailure("SVD produced non-finite singular values");

  const Eigen::Index full = sv.size();
  const double total = sv.squaredNorm();
  TwoSiteSplit out;
  Eigen::Index keep = 1;
  if (total > 0.0) {
    while (keep < full && sv(keep) > kSingularValueFloor * sv(0)) ++keep;
    // tail[j] = Σ_{i ≥ j} λ_i² / Σ λ²
    std::vector<double> tail(static_cast<std::size_t>(full) + 1, 0.0);
    for (Eigen::Index i = full - 1; i >= 0; --i)
      tail[static_cast<std::size_t>(i)] = tail[static_cast<std::size_t>(i) + 1] + sv(i) * sv(i) / total;
    while (keep > 1 && tail[static_cast<std::size_t>(keep) - 1] < policy.epsilon) --keep;
    keep = std::min<Eigen::Index>(keep, std::max(1, policy.max_bond_dim));
    out.discarded_weight = tail[static_cast<std::size_t>(keep)];
  }
  const double kept_weight = sv.head(keep).squaredNorm();
  out.kept_norm = std::sqrt(kept_weight);
  out.singular_values = kept_weight > 0.0 ? Eigen::VectorXd(sv.head(keep) / out.kept_norm)
                                          : Eigen::VectorXd(sv.head(keep));

  Eigen::MatrixXcd u = svd.matrixU().leftCols(keep);
  Eigen::MatrixXcd vh = svd.matrixV().leftCols(keep).adjoint();
  if (absorb == Absorb::right) vh = out.singular_values.asDiagonal() * vh;
  else u = u * out.singular_values.asDiagonal();
  out.left = {u.topRows(chi_left), u.bottomRows(chi_left)};
  out.right = {vh.leftCols(chi_right), vh.rightCols(chi_right)};
  return out;
}

// ---------------------------------------------------------------------------

namespace {

int chain_site_of(const Mps& mps, int qubit) {
  const auto& o = mps.ordering();
  for (std::size_t k = 0; k < o.size(); ++k)
    if (o[k] == qubit) return static_cast<int>(k);
  throw SiteOutOfRange("qubit " + std::to_string(qubit) + " is not in the state");
}

}  // namespace

double expectation_local(const Mps& mps, const Eigen::Matrix2cd& op, int qubit) {
  const int target = chain_site_of(mps, qubit);
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Ones(1, 1);
  Eigen::MatrixXcd norm_env = Eigen::MatrixXcd::Ones(1, 1);
  for (std::size_t k = 0; k < mps.size(); ++k) {
    const auto& a = mps.site(k);
    norm_env = transfer(a, norm_env, a);
    if (static_cast<int>(k) == target) {
      Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(a[0].cols(), a[0].cols());
      for (int so = 0; so < 2; ++so)
        for (int si = 0; si < 2; ++si)
          if (op(so, si) != cplx(0.0)) next += op(so, si) * (a[static_cast<std::size_t>(so)].adjoint() * env * a[static_cast<std::size_t>(si)]);
      env = std::move(next);
    } else {
      env = transfer(a, env, a);
    }
  }
  return env(0, 0).real() / norm_env(0, 0).real();
}

Eigen::VectorXd excitation_probabilities(const Mps& mps) {
  Mps work = mps;
  work.move_center(0);
  const auto n = static_cast<Eigen::Index>(work.size());
  Eigen::VectorXd p(n);
  const auto& first = work.site(0);
  const double norm2 = (first[0].squaredNorm() + first[1].squaredNorm());
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Ones(1, 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& a = work.site(static_cast<std::size_t>(k));
    // Sites to the right are right-orthonormal, so the trace closes the network.
    const Eigen::MatrixXcd excited = a[1].adjoint() * env * a[1];
    p(work.ordering()[static_cast<std::size_t>(k)]) = excited.trace().real() / norm2;
    env = transfer(a, env, a);
  }
  return p;
}

Counts sample(const Mps& mps, std::int64_t runs, std::uint64_t seed) {
  if (runs < 1) throw Error("runs must be positive");
  Mps work = mps;
  work.move_center(0);
  const std::size_t n = work.size();
  std::mt19937_64 rng(seed);
  Counts counts;
  std::string bits(n, '0');
  for (std::int64_t r = 0; r < runs; ++r) {
    Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Ones(1);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& a = work.site(k);
      Eigen::RowVectorXcd w0 = v * a[0];
      Eigen::RowVectorXcd w1 = v * a[1];
      const double p0 = w0.squaredNorm();
      const double p1 = w1.squaredNorm();
      const bool excited = uniform01(rng()) * (p0 + p1) >= p0;
      bits[static_cast<std::size_t>(work.ordering()[k])] = excited ? '1' : '0';
      v = excited ? Eigen::RowVectorXcd(w1 / std::sqrt(p1)) : Eigen::RowVectorXcd(w0 / std::sqrt(p0));
    }
    ++counts[bits];
  }
  return counts;
}

StateVector to_dense(const Mps& mps) {
  const int n = static_cast<int>(mps.size());
  if (n > kMaxDenseQubits) throw TooLarge("dense states are limited to 16 qubits");
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Ones(1, 1);  // rows: chain prefixes
  for (std::size_t k = 0; k < mps.size(); ++k) {
    const auto& a = mps.site(k);
    Eigen::MatrixXcd next(acc.rows() * 2, a[0].cols());
    for (Eigen::Index x = 0; x < acc.rows(); ++x) {
      next.row(2 * x) = acc.row(x) * a[0];
      next.row(2 * x + 1) = acc.row(x) * a[1];
    }
    acc = std::move(next);
  }
  const auto perm = chain_to_qubit_index(mps.ordering());
  StateVector out;
  out.num_qubits = n;
  out.amplitudes.resize(acc.rows());
  for (std::size_t x = 0; x < perm.size(); ++x) out.amplitudes(perm[x]) = acc(static_cast<Eigen::Index>(x), 0);
  return out;
}

cplx inner(const Mps& a, const Mps& b) {
  if (a.size() != b.size()) throw LengthMismatch("states have different lengths");
  if (a.ordering() != b.ordering()) throw LengthMismatch("states use different site orderings");
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Ones(1, 1);
  for (std::size_t k = 0; k < a.size(); ++k) env = transfer(a.site(k), env, b.site(k));
  return env(0, 0);
}

// ---------------------------------------------------------------------------
// Binary container

namespace {

constexpr char kMagic[4] = {'R', 'M', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated MPS container");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("truncated MPS container");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return std::bit_cast<double>(v);
}

}  // namespace

void write_mps(std::ostream& out, const Mps& mps) {
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(mps.size()));
  put_u32(out, static_cast<std::uint32_t>(mps.center()));
  for (int q : mps.ordering()) put_u32(out, static_cast<std::uint32_t>(q));
  for (std::size_t k = 0; k < mps.size(); ++k) {
    const auto& a = mps.site(k);
    put_u32(out, static_cast<std::uint32_t>(a[0].rows()));
    put_u32(out, static_cast<std::uint32_t>(a[0].cols()));
    for (const auto& m : a)
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        put_f64(out, m.data()[i].real());
        put_f64(out, m.data()[i].imag());
      }
  }
}

Mps read_mps(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error("not an MPS container");
  if (get_u32(in) != kVersion) throw Error("unsupported MPS container version");
  const std::uint32_t n = get_u32(in);
  const std::uint32_t center = get_u32(in);
  std::vector<int> ordering(n);
  for (auto& q : ordering) q = static_cast<int>(get_u32(in));
  std::vector<SiteTensor> sites(n);
  for (auto& a : sites) {
    const auto l = static_cast<Eigen::Index>(get_u32(in));
    const auto r = static_cast<Eigen::Index>(get_u32(in));
    for (auto& m : a) {
      m.resize(l, r);
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double re = get_f64(in);
        const double im = get_f64(in);
        m.data()[i] = cplx(re, im);
      }
    }
  }
  return Mps(std::move(sites), std::move(ordering), static_cast<int>(center));
}

}  // namespace rydemu
