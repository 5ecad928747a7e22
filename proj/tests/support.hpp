#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include <cmath>
#include <complex>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "rydemu/exact_solver.hpp"
#include "rydemu/hamiltonian.hpp"
#include "rydemu/mps.hpp"
#include "rydemu/pulse_ir.hpp"

namespace rydemu::test {

inline std::string fixture_path(const std::string& name) { return std::string(RYDEMU_FIXTURE_DIR) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string read_fixture(const std::string& name) { return read_file(fixture_path(name)); }

/// One global channel "ch0" on the given register.
inline PulseSequence global_sequence(Register reg) {
  PulseSequence seq;
  seq.reg = std::move(reg);
  seq.channels.push_back({"ch0", Addressing::global, {}, "ground-rydberg"});
  return seq;
}

inline void add_pulse(PulseSequence& seq, Waveform amplitude, Waveform detuning, double phase = 0.0) {
  Pulse p;
  p.channel = "ch0";
  p.start_ns = seq.duration_ns();
  p.amplitude = std::move(amplitude);
  p.detuning = std::move(detuning);
  p.phase_rad = phase;
  seq.pulses.push_back(std::move(p));
}

/// Random complex Gaussian matrix.
inline Eigen::MatrixXcd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = {g(rng), g(rng)};
  return m;
}

inline Eigen::MatrixXcd random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  const Eigen::MatrixXcd a = random_matrix(n, n, rng);
  return (a + a.adjoint()) / 2.0;
}

/// Normalised MPS with random tensors of bond dimension up to `chi`.
inline Mps random_mps(int n, int chi, std::mt19937_64& rng, std::vector<int> ordering = {}) {
  std::vector<SiteTensor> sites;
  int left = 1;
  for (int k = 0; k < n; ++k) {
    const int max_right = 1 << std::min(n - k - 1, 20);
    const int right = k == n - 1 ? 1 : std::min({chi, 2 * left, max_right});
    sites.push_back({random_matrix(left, right, rng), random_matrix(left, right, rng)});
    left = right;
  }
  Mps mps(std::move(sites), std::move(ordering), 0);
  mps.move_center(n - 1);
  mps.move_center(0);
  mps.normalize();
  return mps;
}

inline StateVector random_state(int n, std::mt19937_64& rng) {
  StateVector s;
  s.num_qubits = n;
  s.amplitudes = random_matrix(Eigen::Index{1} << n, 1, rng);
  s.amplitudes.normalize();
  return s;
}

/// Dense slice Hamiltonian assembled term by term with Kronecker products;
/// an oracle independent of the library's bit-twiddling assembly.
inline Eigen::MatrixXcd kron_hamiltonian(const HamiltonianSlice& slice) {
  const int n = static_cast<int>(slice.size());
  const Eigen::Index dim = Eigen::Index{1} << n;
  auto embed = [&](const std::vector<std::pair<int, Eigen::Matrix2cd>>& ops) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Ones(1, 1);
    for (int q = 0; q < n; ++q) {
      Eigen::Matrix2cd local = Eigen::Matrix2cd::Identity();
      for (const auto& [site, op] : ops)
        if (site == q) local = op;
      Eigen::MatrixXcd next(out.rows() * 2, out.cols() * 2);
      for (Eigen::Index r = 0; r < out.rows(); ++r)
        for (Eigen::Index c = 0; c < out.cols(); ++c) next.block(2 * r, 2 * c, 2, 2) = out(r, c) * local;
      out = std::move(next);
    }
    return out;
  };
  Eigen::Matrix2cd sx, sy, nop;
  sx << 0, 1, 1, 0;
  sy << 0, std::complex<double>(0, -1), std::complex<double>(0, 1), 0;
  nop << 0, 0, 0, 1;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    const Eigen::Matrix2cd drive =
        slice.omega(i) / 2.0 * (std::cos(slice.phase(i)) * sx + std::sin(slice.phase(i)) * sy) - slice.delta(i) * nop;
    h += embed({{i, drive}});
    for (int j = i + 1; j < n; ++j) h += slice.interactions(i, j) * embed({{i, nop}, {j, nop}});
  }
  return h;
}

/// exp(−iHt)ψ by the full matrix exponential.
inline Eigen::VectorXcd expm_apply(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& psi, double t) {
  const Eigen::MatrixXcd u = (std::complex<double>(0.0, -t) * h).exp();
  return u * psi;
}

/// Random slice with Ω ∈ [0, omax], δ ∈ [−dmax, dmax], φ ∈ [0, 2π) on a chain.
inline HamiltonianSlice random_slice(const Register& reg, double c6, std::mt19937_64& rng, double omax = 8.0,
                                     double dmax = 8.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(reg.size());
  HamiltonianSlice s;
  s.omega.resize(n);
  s.delta.resize(n);
  s.phase.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.omega(i) = omax * u(rng);
    s.delta(i) = dmax * (2.0 * u(rng) - 1.0);
    s.phase(i) = 2.0 * M_PI * u(rng);
  }
  s.interactions = interaction_matrix(reg, c6);
  return s;
}

inline double fidelity(const StateVector& a, const StateVector& b) {
  return std::abs(a.amplitudes.dot(b.amplitudes));
}

}  // namespace rydemu::test
