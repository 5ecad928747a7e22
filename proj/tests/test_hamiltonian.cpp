#include <doctest.h>

#include <random>
#include <sstream>

#include <json.hpp>

#include "rydemu/errors.hpp"
#include "rydemu/hamiltonian.hpp"
#include "support.hpp"

using namespace rydemu;
using rydemu::test::kron_hamiltonian;
using rydemu::test::random_slice;

namespace {

double rel_frobenius(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { return (a - b).norm() / b.norm(); }

HamiltonianSlice uniform_slice(const Register& reg, double c6, double omega, double delta, double phase = 0.0) {
  const auto n = static_cast<Eigen::Index>(reg.size());
  HamiltonianSlice s;
  s.omega = Eigen::VectorXd::Constant(n, omega);
  s.delta = Eigen::VectorXd::Constant(n, delta);
  s.phase = Eigen::VectorXd::Constant(n, phase);
  s.interactions = interaction_matrix(reg, c6);
  return s;
}

Register random_register(int n, std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  Register reg;
  for (int i = 0; i < n; ++i) {
    reg.qubit_ids.push_back("r" + std::to_string(i));
    reg.positions.push_back({u(rng), u(rng)});
  }
  return reg;
}

}  // namespace

TEST_CASE("interaction matrix") {
  CHECK(interaction_matrix(Register::chain(2, 2.0), 1.0)(0, 1) == doctest::Approx(1.0 / 64.0).epsilon(1e-15));
  CHECK(interaction_matrix(Register::chain(2, 1.0), 1.0)(0, 1) == 1.0);

  const Eigen::MatrixXd v = interaction_matrix(Register::chain(16, 4.0), kDefaultInteractionCoeff);
  CHECK(v.isApprox(v.transpose(), 0.0));
  CHECK(v.diagonal().isZero(0.0));
  CHECK(v(0, 1) > 6.3);  // nearest neighbours are blockaded at Ω_max
  CHECK(v(0, 1) == doctest::Approx(kDefaultInteractionCoeff / 4096.0));
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      if (i != j) CHECK(v(i, j) > 0.0);

  Register dup = Register::chain(3, 1.0);
  dup.positions[2] = dup.positions[0];
  CHECK_THROWS_AS(interaction_matrix(dup, 1.0), DegenerateRegister);
}

TEST_CASE("doubling distances divides interactions by 64") {
  std::mt19937_64 rng(3);
  const Register a = random_register(7, rng, 20.0);
  Register b = a;
  for (auto& p : b.positions) p = {2.0 * p.x_um, 2.0 * p.y_um};
  const Eigen::MatrixXd va = interaction_matrix(a, 1e5), vb = interaction_matrix(b, 1e5);
  CHECK((vb * 64.0 - va).cwiseAbs().maxCoeff() <= 1e-12 * va.cwiseAbs().maxCoeff());
}

TEST_CASE("blockade radius") {
  CHECK(blockade_radius(1.0, 1.0) == 1.0);
  CHECK(blockade_radius(64.0, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(blockade_radius(kDefaultInteractionCoeff, 6.3) == doctest::Approx(9.752409000295737).epsilon(1e-13));
  CHECK_THROWS_AS(blockade_radius(1.0, 0.0), NonpositiveOmega);
  CHECK_THROWS_AS(blockade_radius(1.0, -2.0), NonpositiveOmega);
}

TEST_CASE("dense hamiltonian small cases") {
  const Register one = Register::chain(1, 1.0);
  Eigen::MatrixXcd h = dense_hamiltonian(uniform_slice(one, 1.0, 2.0, 0.0));
  Eigen::Matrix2cd expect;
  expect << 0, 1, 1, 0;
  CHECK(h.isApprox(expect, 0.0));

  h = dense_hamiltonian(uniform_slice(one, 1.0, 0.0, 3.0));
  expect << 0, 0, 0, -3;
  CHECK(h.isApprox(expect, 0.0));

  HamiltonianSlice pair = uniform_slice(Register::chain(2, 1.0), 5.0, 0.0, 0.0);
  h = dense_hamiltonian(pair);
  Eigen::Matrix4cd e4 = Eigen::Matrix4cd::Zero();
  e4(3, 3) = 5.0;
  CHECK(h.isApprox(e4, 0.0));

  // ⟨1|h|0⟩ = Ω/2·e^{iφ}
  h = dense_hamiltonian(uniform_slice(one, 1.0, 2.0, 0.0, M_PI / 2));
  CHECK(std::abs(h(1, 0) - cplx(0.0, 1.0)) < 1e-15);
  CHECK(std::abs(h(0, 1) - cplx(0.0, -1.0)) < 1e-15);

  CHECK_THROWS_AS(dense_hamiltonian(HamiltonianSlice::idle(Eigen::MatrixXd::Zero(17, 17))), TooLarge);
}

TEST_CASE("dense hamiltonian matches the Kronecker oracle and is Hermitian") {
  std::mt19937_64 rng(11);
  for (int n : {2, 3, 5, 7}) {
    const HamiltonianSlice s = random_slice(Register::chain(n, 5.0), kDefaultInteractionCoeff, rng);
    const Eigen::MatrixXcd h = dense_hamiltonian(s);
    const Eigen::MatrixXcd oracle = kron_hamiltonian(s);
    CHECK(rel_frobenius(h, oracle) < 1e-14);
    CHECK((h - Eigen::MatrixXcd(h.adjoint())).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("relabelling qubits permutes the dense operator") {
  std::mt19937_64 rng(5);
  const int n = 5;
  Register reg = random_register(n, rng, 15.0);
  const HamiltonianSlice s = random_slice(reg, 1e4, rng);
  const std::vector<int> perm{3, 0, 4, 1, 2};  // new qubit q is old qubit perm[q]
  HamiltonianSlice p = s;
  for (int q = 0; q < n; ++q) {
    p.omega(q) = s.omega(perm[q]);
    p.delta(q) = s.delta(perm[q]);
    p.phase(q) = s.phase(perm[q]);
    for (int r = 0; r < n; ++r) p.interactions(q, r) = s.interactions(perm[q], perm[r]);
  }
  const Eigen::MatrixXcd h = dense_hamiltonian(s), hp = dense_hamiltonian(p);
  auto map_index = [&](Eigen::Index new_idx) {
    Eigen::Index old_idx = 0;
    for (int q = 0; q < n; ++q)
      if ((new_idx >> (n - 1 - q)) & 1) old_idx |= Eigen::Index{1} << (n - 1 - perm[q]);
    return old_idx;
  };
  double worst = 0.0;
  for (Eigen::Index a = 0; a < (1 << n); ++a)
    for (Eigen::Index b = 0; b < (1 << n); ++b) worst = std::max(worst, std::abs(hp(a, b) - h(map_index(a), map_index(b))));
  CHECK(worst < 1e-12 * h.cwiseAbs().maxCoeff());
}

TEST_CASE("slice schedule averages controls over each window") {
  PulseSequence seq = test::global_sequence(Register::chain(2, 6.0));
  test::add_pulse(seq, Waveform::ramp(25, 0.0, 24.0), Waveform::constant(25, -1.0));
  const SliceSchedule sched(seq, 10, kDefaultInteractionCoeff);
  REQUIRE(sched.size() == 3);
  CHECK(sched.duration_ns(2) == 5);
  CHECK(sched[0].omega(0) == doctest::Approx(4.5));
  CHECK(sched[1].omega(1) == doctest::Approx(14.5));
  CHECK(sched[2].omega(0) == doctest::Approx(22.0));
  CHECK(sched[2].delta(0) == -1.0);
}

TEST_CASE("chain ordering") {
  SUBCASE("grid uses a snake") {
    const auto ord = chain_ordering(Register::grid(3, 3, 5.0));
    CHECK(ord == std::vector<int>{0, 1, 2, 5, 4, 3, 6, 7, 8});
  }
  SUBCASE("irregular register uses a permutation of all qubits") {
    std::mt19937_64 rng(9);
    const Register reg = random_register(12, rng, 30.0);
    auto ord = chain_ordering(reg);
    REQUIRE(ord.size() == 12);
    int leftmost = 0;
    for (int i = 1; i < 12; ++i)
      if (reg.positions[i].x_um < reg.positions[leftmost].x_um) leftmost = i;
    CHECK(ord[0] == leftmost);
    std::sort(ord.begin(), ord.end());
    for (int i = 0; i < 12; ++i) CHECK(ord[i] == i);
  }
}

TEST_CASE("MPO reproduces the dense operator") {
  std::mt19937_64 rng(21);
  SUBCASE("single site") {
    const HamiltonianSlice s = random_slice(Register::chain(1, 1.0), 1.0, rng);
    const Mpo mpo = rydberg_mpo(s, {0});
    REQUIRE(mpo.size() == 1);
    CHECK(mpo.max_bond_dim() == 1);
    CHECK(mpo.site(0).at(0, 0).isApprox(Eigen::MatrixXcd(dense_hamiltonian(s)), 1e-15));
  }
  SUBCASE("two sites") {
    const HamiltonianSlice s = random_slice(Register::chain(2, 5.0), kDefaultInteractionCoeff, rng);
    const Eigen::MatrixXcd dense = dense_hamiltonian(s);
    CHECK((rydberg_mpo(s, {0, 1}).to_dense() - dense).norm() <= 1e-12 * dense.norm());
    CHECK((rydberg_mpo(s, {1, 0}).to_dense() - dense).norm() <= 1e-12 * dense.norm());
  }
  SUBCASE("ten-site chain") {
    const Register reg = Register::chain(10, 5.0);
    const HamiltonianSlice s = random_slice(reg, kDefaultInteractionCoeff, rng);
    const Mpo mpo = rydberg_mpo(s, chain_ordering(reg));
    CHECK(rel_frobenius(mpo.to_dense(), dense_hamiltonian(s)) < 1e-10);
  }
  SUBCASE("random slices and orderings up to ten sites") {
    for (int trial = 0; trial < 12; ++trial) {
      const int n = 3 + trial % 8;
      const Register reg = random_register(n, rng, 4.0 * n);
      const HamiltonianSlice s = random_slice(reg, kDefaultInteractionCoeff, rng);
      std::vector<int> ord = chain_ordering(reg);
      if (trial % 3 == 0) std::shuffle(ord.begin(), ord.end(), rng);
      const Mpo mpo = rydberg_mpo(s, ord);
      CAPTURE(n);
      CHECK(rel_frobenius(mpo.to_dense(), dense_hamiltonian(s)) < 1e-10);
      CHECK(mpo.max_bond_dim() <= n + 1);
    }
  }
  SUBCASE("grid ordering") {
    const Register reg = Register::grid(3, 4, 6.0);
    const HamiltonianSlice s = random_slice(reg, kDefaultInteractionCoeff, rng);
    CHECK(rel_frobenius(rydberg_mpo(s, chain_ordering(reg)).to_dense(), dense_hamiltonian(s)) < 1e-10);
  }
}

TEST_CASE("MPO compression bound and failure") {
  std::mt19937_64 rng(4);
  const Register reg = Register::chain(12, 5.0);
  const HamiltonianSlice s = random_slice(reg, kDefaultInteractionCoeff, rng);
  CHECK_THROWS_AS(rydberg_mpo(s, chain_ordering(reg), 1e-12, 2), CompressionFailure);
  const Mpo loose = rydberg_mpo(s, chain_ordering(reg), 1e-6);
  const Mpo tight = rydberg_mpo(s, chain_ordering(reg), 1e-13);
  CHECK(loose.max_bond_dim() <= tight.max_bond_dim());
  CHECK(rel_frobenius(loose.to_dense(), dense_hamiltonian(s)) < 1e-6);
}

TEST_CASE("MPO json dump") {
  std::mt19937_64 rng(8);
  const HamiltonianSlice s = random_slice(Register::chain(3, 5.0), kDefaultInteractionCoeff, rng);
  const Mpo mpo = rydberg_mpo(s, {0, 1, 2});
  std::ostringstream os;
  write_mpo_json(os, mpo);
  const auto j = nlohmann::json::parse(os.str());
  CHECK(j["format"] == "rydemu-mpo");
  CHECK(j["version"] == 1);
  REQUIRE(j["sites"].size() == 3);
  const auto& s1 = j["sites"][1];
  CHECK(s1["re"].size() == static_cast<std::size_t>(s1["left_dim"].get<int>() * s1["right_dim"].get<int>() * 4));
}
