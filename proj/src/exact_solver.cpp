#include "rydemu/exact_solver.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <random>

#include "rydemu/errors.hpp"

namespace rydemu {

StateVector StateVector::basis(std::string_view bits) {
  const int n = static_cast<int>(bits.size());
  if (n == 0) throw InvalidLength("empty bitstring");
  if (n > kMaxDenseQubits) throw TooLarge(std::to_string(n) + " qubits exceed the dense limit of 16");
  std::int64_t index = 0;
  for (char c : bits) {
    if (c != '0' && c != '1') throw InvalidLength("bitstring may contain only 0 and 1");
    index = (index << 1) | (c == '1');
  }
  StateVector s;
  s.num_qubits = n;
  s.amplitudes = Eigen::VectorXcd::Zero(std::int64_t{1} << n);
  s.amplitudes(index) = 1.0;
  return s;
}

namespace {

// Matrix-free slice Hamiltonian on 2^N amplitudes.
class DenseOperator {
 public:
  DenseOperator(const HamiltonianSlice& slice, const Eigen::VectorXd& interaction_diag)
      : n_(static_cast<int>(slice.size())), diag_(interaction_diag) {
    const std::int64_t dim = diag_.size();
    for (int i = 0; i < n_; ++i) {
      const double d = slice.delta(i);
      if (d != 0.0) {
        const std::int64_t bit = std::int64_t{1} << (n_ - 1 - i);
        for (std::int64_t x = 0; x < dim; ++x)
          if (x & bit) diag_(x) -= d;
      }
      if (slice.omega(i) != 0.0)
        flips_.push_back({std::int64_t{1} << (n_ - 1 - i), std::polar(slice.omega(i) / 2.0, slice.phase(i))});
    }
  }

  Eigen::VectorXcd operator()(const Eigen::VectorXcd& x) const {
    Eigen::VectorXcd y = diag_.cwiseProduct(x);
    const std::int64_t dim = diag_.size();
    // Interleaved re/im by hand: std::complex products go through the
    // inf/nan-checking libcall and dominate the runtime otherwise.
    const double* in = reinterpret_cast<const double*>(x.data());
    double* out = reinterpret_cast<double*>(y.data());
    for (const auto& [bit, up] : flips_) {
      const double ur = up.real(), ui = up.imag();
      for (std::int64_t base = 0; base < dim; base += 2 * bit)
        for (std::int64_t x0 = base; x0 < base + bit; ++x0) {
          const std::int64_t x1 = x0 | bit;
          const double ar = in[2 * x0], ai = in[2 * x0 + 1];
          const double br = in[2 * x1], bi = in[2 * x1 + 1];
          out[2 * x1] += ur * ar - ui * ai;
          out[2 * x1 + 1] += ur * ai + ui * ar;
          out[2 * x0] += ur * br + ui * bi;  // conj(up) * x1
          out[2 * x0 + 1] += ur * bi - ui * br;
        }
    }
    return y;
  }

 private:
  struct Flip {
    std::int64_t bit;
    cplx up;  // ⟨1|h|0⟩
  };
  int n_;
  Eigen::VectorXd diag_;
  std::vector<Flip> flips_;
};

Eigen::VectorXd interaction_diagonal(const Eigen::MatrixXd& v) {
  const int n = static_cast<int>(v.rows());
  const std::int64_t dim = std::int64_t{1} << n;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(dim);
  // Build from the state without its lowest set bit.
  for (std::int64_t x = 1; x < dim; ++x) {
    const std::int64_t low = x & -x;
    const std::int64_t rest = x ^ low;
    const int i = n - 1 - std::countr_zero(static_cast<std::uint64_t>(low));
    double e = diag(rest);
    for (int j = 0; j < n; ++j)
      if ((rest >> (n - 1 - j)) & 1) e += v(i, j);
    diag(x) = e;
  }
  return diag;
}

void check_size(std::size_t n) {
  if (n > static_cast<std::size_t>(kMaxDenseQubits))
    throw TooLarge(std::to_string(n) + " qubits exceed the exact-solver limit of 16; use the tdvp solver");
}

}  // namespace

Eigen::VectorXcd propagate_slice(const HamiltonianSlice& slice, const Eigen::VectorXcd& psi, double tau_us,
                                 const KrylovOptions& krylov) {
  check_size(slice.size());
  const DenseOperator h(slice, interaction_diagonal(slice.interactions));
  return local_exponential(h, psi, cplx(0.0, -tau_us), krylov);
}

double energy(const HamiltonianSlice& slice, const StateVector& state) {
  check_size(slice.size());
  const DenseOperator h(slice, interaction_diagonal(slice.interactions));
  return state.amplitudes.dot(h(state.amplitudes)).real();
}

ExactResult evolve_exact(const PulseSequence& seq, const EmulatorConfig& config, const KrylovOptions& krylov) {
  check_size(seq.num_qubits());
  config.validate();
  const SliceSchedule schedule(seq, static_cast<std::int64_t>(std::llround(config.dt_ns)), config.interaction_coeff);
  const Eigen::VectorXd int_diag = interaction_diagonal(schedule.interactions());

  ExactResult result;
  result.final_state = StateVector::basis(seq.initial_bits());
  result.trajectory.times_ns.push_back(0.0);
  result.trajectory.excitation.push_back(excitation_probabilities(result.final_state));

  Eigen::VectorXcd& psi = result.final_state.amplitudes;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const DenseOperator h(schedule[k], int_diag);
    psi = local_exponential(h, psi, cplx(0.0, -1e-3 * static_cast<double>(schedule.duration_ns(k))), krylov);
    result.max_norm_deviation = std::max(result.max_norm_deviation, std::abs(psi.norm() - 1.0));
    result.trajectory.times_ns.push_back(static_cast<double>(schedule.end_ns(k)));
    result.trajectory.excitation.push_back(excitation_probabilities(result.final_state));
  }
  return result;
}

Eigen::VectorXd excitation_probabilities(const StateVector& state) {
  const int n = state.num_qubits;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  for (std::int64_t x = 0; x < state.amplitudes.size(); ++x) {
    const double w = std::norm(state.amplitudes(x));
    if (w == 0.0) continue;
    for (int i = 0; i < n; ++i)
      if ((x >> (n - 1 - i)) & 1) p(i) += w;
  }
  return p;
}

double uniform01(std::uint64_t draw) noexcept {
  return static_cast<double>(draw >> 11) * 0x1.0p-53;
}

Counts sample_dense(const StateVector& state, std::int64_t runs, std::uint64_t seed) {
  if (runs < 1) throw Error("runs must be positive");
  const int n = state.num_qubits;
  std::vector<double> cdf(static_cast<std::size_t>(state.amplitudes.size()));
  double total = 0.0;
  for (std::int64_t x = 0; x < state.amplitudes.size(); ++x) {
    total += std::norm(state.amplitudes(x));
    cdf[static_cast<std::size_t>(x)] = total;
  }
  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> hits(cdf.size(), 0);
  for (std::int64_t r = 0; r < runs; ++r) {
    const double u = uniform01(rng()) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) {
      // u rounded up to the total: take the last state with weight
      --it;
      while (it != cdf.begin() && *it == *(it - 1)) --it;
    }
    ++hits[static_cast<std::size_t>(it - cdf.begin())];
  }
  Counts counts;
  for (std::size_t x = 0; x < hits.size(); ++x) {
    if (!hits[x]) continue;
    std::string bits(static_cast<std::size_t>(n), '0');
    for (int i = 0; i < n; ++i)
      if ((x >> (n - 1 - i)) & 1) bits[static_cast<std::size_t>(i)] = '1';
    counts[bits] = hits[x];
  }
  return counts;
}

}  // namespace rydemu
