#include "rydemu/tdvp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "rydemu/errors.hpp"

namespace rydemu {

namespace {

Environment boundary() { return Environment{Eigen::MatrixXcd::Ones(1, 1)}; }

// Effective Hamiltonian on a two-site tensor stored as a (2χl)×(2χr) matrix.
class TwoSiteOperator {
 public:
  TwoSiteOperator(const Environment& left, const Environment& right, const MpoSite& w1, const MpoSite& w2,
                  Eigen::Index chi_l, Eigen::Index chi_r)
      : left_(left), right_(right), w1_(w1), w2_(w2), chi_l_(chi_l), chi_r_(chi_r) {}

  Eigen::VectorXcd operator()(const Eigen::VectorXcd& v) const {
    const Eigen::Map<const Eigen::MatrixXcd> theta(v.data(), 2 * chi_l_, 2 * chi_r_);
    const int wl = w1_.left_dim;
    const int wm = w1_.right_dim;
    const int wr = w2_.right_dim;

    // T[b] rows s1'·χl + α: Σ_a Σ_s1 W1(a,b)(s1',s1) L[a] θ[s1, :]
    std::vector<Eigen::MatrixXcd> t(static_cast<std::size_t>(wm));
    Eigen::MatrixXcd x(chi_l_, 2 * chi_r_);
    for (int a = 0; a < wl; ++a) {
      for (int s1 = 0; s1 < 2; ++s1) {
        bool used = false;
        for (int b = 0; b < wm && !used; ++b) used = w1_.at(a, b)(0, s1) != cplx(0.0) || w1_.at(a, b)(1, s1) != cplx(0.0);
        if (!used) continue;
        x.noalias() = left_[static_cast<std::size_t>(a)] * theta.middleRows(s1 * chi_l_, chi_l_);
        for (int b = 0; b < wm; ++b)
          for (int so = 0; so < 2; ++so) {
            const cplx c = w1_.at(a, b)(so, s1);
            if (c == cplx(0.0)) continue;
            auto& tb = t[static_cast<std::size_t>(b)];
            if (tb.size() == 0) tb = Eigen::MatrixXcd::Zero(2 * chi_l_, 2 * chi_r_);
            tb.middleRows(so * chi_l_, chi_l_) += c * x;
          }
      }
    }

    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(2 * chi_l_, 2 * chi_r_);
    Eigen::MatrixXcd u(2 * chi_l_, 2 * chi_r_);
    for (int c = 0; c < wr; ++c) {
      u.setZero();
      bool any = false;
      for (int b = 0; b < wm; ++b) {
        const auto& tb = t[static_cast<std::size_t>(b)];
        if (tb.size() == 0) continue;
        const auto& op = w2_.at(b, c);
        for (int so = 0; so < 2; ++so)
          for (int si = 0; si < 2; ++si)
            if (op(so, si) != cplx(0.0)) {
              u.middleCols(so * chi_r_, chi_r_) += op(so, si) * tb.middleCols(si * chi_r_, chi_r_);
              any = true;
            }
      }
      if (!any) continue;
      for (int so = 0; so < 2; ++so)
        out.middleCols(so * chi_r_, chi_r_).noalias() += u.middleCols(so * chi_r_, chi_r_) * right_[static_cast<std::size_t>(c)];
    }
    return Eigen::Map<const Eigen::VectorXcd>(out.data(), out.size());
  }

 private:
  const Environment& left_;
  const Environment& right_;
  const MpoSite& w1_;
  const MpoSite& w2_;
  Eigen::Index chi_l_;
  Eigen::Index chi_r_;
};

// Effective Hamiltonian on one site stored as a (2χl)×χr matrix.
class OneSiteOperator {
 public:
  OneSiteOperator(const Environment& left, const Environment& right, const MpoSite& w, Eigen::Index chi_l,
                  Eigen::Index chi_r)
      : left_(left), right_(right), w_(w), chi_l_(chi_l), chi_r_(chi_r) {}

  Eigen::VectorXcd operator()(const Eigen::VectorXcd& v) const {
    const Eigen::Map<const Eigen::MatrixXcd> m(v.data(), 2 * chi_l_, chi_r_);
    std::vector<Eigen::MatrixXcd> t(static_cast<std::size_t>(w_.right_dim));
    Eigen::MatrixXcd x(chi_l_, chi_r_);
    for (int a = 0; a < w_.left_dim; ++a)
      for (int s = 0; s < 2; ++s) {
        x.noalias() = left_[static_cast<std::size_t>(a)] * m.middleRows(s * chi_l_, chi_l_);
        for (int b = 0; b < w_.right_dim; ++b)
          for (int so = 0; so < 2; ++so) {
            const cplx c = w_.at(a, b)(so, s);
            if (c == cplx(0.0)) continue;
            auto& tb = t[static_cast<std::size_t>(b)];
            if (tb.size() == 0) tb = Eigen::MatrixXcd::Zero(2 * chi_l_, chi_r_);
            tb.middleRows(so * chi_l_, chi_l_) += c * x;
          }
      }
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(2 * chi_l_, chi_r_);
    for (int b = 0; b < w_.right_dim; ++b)
      if (t[static_cast<std::size_t>(b)].size() != 0)
        out.noalias() += t[static_cast<std::size_t>(b)] * right_[static_cast<std::size_t>(b)];
    return Eigen::Map<const Eigen::VectorXcd>(out.data(), out.size());
  }

 private:
  const Environment& left_;
  const Environment& right_;
  const MpoSite& w_;
  Eigen::Index chi_l_;
  Eigen::Index chi_r_;
};

Eigen::VectorXcd flatten_rows(const SiteTensor& a) {
  const auto l = a[0].rows();
  const auto r = a[0].cols();
  Eigen::MatrixXcd m(2 * l, r);
  m.topRows(l) = a[0];
  m.bottomRows(l) = a[1];
  return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size());
}

SiteTensor unflatten_rows(const Eigen::VectorXcd& v, Eigen::Index l, Eigen::Index r) {
  const Eigen::Map<const Eigen::MatrixXcd> m(v.data(), 2 * l, r);
  return {m.topRows(l), m.bottomRows(l)};
}

void check_pair(const Mps& mps, const Mpo& mpo) {
  if (mps.size() != mpo.size()) throw LengthMismatch("MPS and MPO lengths differ");
  if (mps.ordering() != mpo.ordering()) throw LengthMismatch("MPS and MPO use different site orderings");
}

}  // namespace

// ---------------------------------------------------------------------------

Environment extend_left(const Environment& env, const SiteTensor& site, const MpoSite& w) {
  const auto chi = site[0].cols();
  Environment out(static_cast<std::size_t>(w.right_dim), Eigen::MatrixXcd::Zero(chi, chi));
  for (int a = 0; a < w.left_dim; ++a) {
    std::array<Eigen::MatrixXcd, 2> x;
    for (int si = 0; si < 2; ++si) {
      for (int so = 0; so < 2; ++so) {
        bool used = false;
        for (int b = 0; b < w.right_dim && !used; ++b) used = w.at(a, b)(so, si) != cplx(0.0);
        if (!used) continue;
        if (x[static_cast<std::size_t>(si)].size() == 0)
          x[static_cast<std::size_t>(si)] = env[static_cast<std::size_t>(a)] * site[static_cast<std::size_t>(si)];
        const Eigen::MatrixXcd y = site[static_cast<std::size_t>(so)].adjoint() * x[static_cast<std::size_t>(si)];
        for (int b = 0; b < w.right_dim; ++b) {
          const cplx c = w.at(a, b)(so, si);
          if (c != cplx(0.0)) out[static_cast<std::size_t>(b)] += c * y;
        }
      }
    }
  }
  return out;
}

Environment extend_right(const Environment& env, const SiteTensor& site, const MpoSite& w) {
  const auto chi = site[0].rows();
  Environment out(static_cast<std::size_t>(w.left_dim), Eigen::MatrixXcd::Zero(chi, chi));
  for (int b = 0; b < w.right_dim; ++b) {
    std::array<Eigen::MatrixXcd, 2> x;
    for (int si = 0; si < 2; ++si) {
      for (int so = 0; so < 2; ++so) {
        bool used = false;
        for (int a = 0; a < w.left_dim && !used; ++a) used = w.at(a, b)(so, si) != cplx(0.0);
        if (!used) continue;
        if (x[static_cast<std::size_t>(si)].size() == 0)
          x[static_cast<std::size_t>(si)] = site[static_cast<std::size_t>(si)] * env[static_cast<std::size_t>(b)];
        const Eigen::MatrixXcd y = x[static_cast<std::size_t>(si)] * site[static_cast<std::size_t>(so)].adjoint();
        for (int a = 0; a < w.left_dim; ++a) {
          const cplx c = w.at(a, b)(so, si);
          if (c != cplx(0.0)) out[static_cast<std::size_t>(a)] += c * y;
        }
      }
    }
  }
  return out;
}

Environments::Environments(const Mps& mps, const Mpo& mpo) {
  check_pair(mps, mpo);
  const std::size_t n = mps.size();
  const auto center = static_cast<std::size_t>(mps.center());
  left_.resize(n + 1);
  right_.resize(n + 1);
  left_[0] = boundary();
  for (std::size_t k = 0; k < center; ++k) left_[k + 1] = extend_left(left_[k], mps.site(k), mpo.site(k));
  right_[n] = boundary();
  for (std::size_t k = n; k-- > center + 1;) right_[k] = extend_right(right_[k + 1], mps.site(k), mpo.site(k));
}

void Environments::update_left(std::size_t k, const SiteTensor& site, const MpoSite& w) {
  left_[k] = extend_left(left_[k - 1], site, w);
}

void Environments::update_right(std::size_t k, const SiteTensor& site, const MpoSite& w) {
  right_[k] = extend_right(right_[k + 1], site, w);
}

double Environments::expectation_at_center(const Mps& mps, const Mpo& mpo) const {
  const auto c = static_cast<std::size_t>(mps.center());
  const auto& site = mps.site(c);
  const OneSiteOperator h(left_[c], right_[c + 1], mpo.site(c), site[0].rows(), site[0].cols());
  const Eigen::VectorXcd v = flatten_rows(site);
  return v.dot(h(v)).real() / v.squaredNorm();
}

double energy(const Mps& mps, const Mpo& mpo) {
  check_pair(mps, mpo);
  Environment env = boundary();
  for (std::size_t k = 0; k < mps.size(); ++k) env = extend_left(env, mps.site(k), mpo.site(k));
  return env[0](0, 0).real() / inner(mps, mps).real();
}

// ---------------------------------------------------------------------------

SweepStats tdvp_sweep(Mps& mps, const Mpo& mpo, double dt_us, const IntegratorParams& params) {
  check_pair(mps, mpo);
  const std::size_t n = mps.size();
  mps.move_center(0);
  mps.normalize();
  Environments env(mps, mpo);
  SweepStats stats;
  double norm_product = 1.0;

  if (n == 1) {
    auto& a = mps.site(0);
    const OneSiteOperator h(env.left(0), env.right(1), mpo.site(0), 1, 1);
    Eigen::VectorXcd v = local_exponential(h, flatten_rows(a), cplx(0.0, -dt_us), params.krylov);
    const double nrm = v.norm();
    stats.norm_drift = std::abs(1.0 - nrm);
    a = unflatten_rows(v / nrm, 1, 1);
    return stats;
  }

  const cplx forward(0.0, -0.5 * dt_us);
  const cplx backward(0.0, 0.5 * dt_us);

  auto two_site = [&](std::size_t k, Absorb absorb) {
    const auto chi_l = mps.site(k)[0].rows();
    const auto chi_r = mps.site(k + 1)[0].cols();
    const Eigen::MatrixXcd theta = two_site_theta(mps.site(k), mps.site(k + 1));
    const TwoSiteOperator h(env.left(k), env.right(k + 2), mpo.site(k), mpo.site(k + 1), chi_l, chi_r);
    const Eigen::VectorXcd evolved =
        local_exponential(h, Eigen::Map<const Eigen::VectorXcd>(theta.data(), theta.size()), forward, params.krylov);
    const Eigen::Map<const Eigen::MatrixXcd> theta_new(evolved.data(), 2 * chi_l, 2 * chi_r);
    TwoSiteSplit split = truncate_two_site(theta_new, static_cast<int>(chi_l), static_cast<int>(chi_r),
                                           params.policy, absorb);
    norm_product *= split.kept_norm;
    stats.discarded_weight += split.discarded_weight;
    const int kept = static_cast<int>(split.singular_values.size());
    stats.max_chi = std::max(stats.max_chi, kept);
    if (kept >= params.policy.max_bond_dim && split.discarded_weight >= params.policy.epsilon)
      stats.resource_limit = true;
    mps.site(k) = std::move(split.left);
    mps.site(k + 1) = std::move(split.right);
  };

  auto one_site_back = [&](std::size_t k) {
    auto& a = mps.site(k);
    const auto chi_l = a[0].rows();
    const auto chi_r = a[0].cols();
    const OneSiteOperator h(env.left(k), env.right(k + 1), mpo.site(k), chi_l, chi_r);
    Eigen::VectorXcd v = local_exponential(h, flatten_rows(a), backward, params.krylov);
    const double nrm = v.norm();
    norm_product *= nrm;
    a = unflatten_rows(v / nrm, chi_l, chi_r);
  };

  for (std::size_t k = 0; k + 1 < n; ++k) {
    two_site(k, Absorb::right);
    mps.set_center(static_cast<int>(k + 1));
    env.update_left(k + 1, mps.site(k), mpo.site(k));
    if (k + 2 < n) one_site_back(k + 1);
  }
  for (std::size_t k = n - 1; k-- > 0;) {
    two_site(k, Absorb::left);
    mps.set_center(static_cast<int>(k));
    env.update_right(k + 1, mps.site(k + 1), mpo.site(k + 1));
    if (k > 0) one_site_back(k);
  }
  stats.norm_drift = std::abs(1.0 - norm_product);
  return stats;
}

TdvpResult evolve_tdvp(const PulseSequence& seq, const EmulatorConfig& config, const KrylovOptions& krylov) {
  using clock = std::chrono::steady_clock;
  config.validate();
  const std::vector<int> ordering = chain_ordering(seq.reg);
  const SliceSchedule schedule(seq, static_cast<std::int64_t>(std::llround(config.dt_ns)), config.interaction_coeff);
  IntegratorParams params;
  params.dt_ns = config.dt_ns;
  params.krylov = krylov;
  params.policy = {config.epsilon(), config.max_bond_dim};

  TdvpResult result{Mps::product_state(seq.initial_bits(), ordering), {}, {}};
  auto& diag = result.diagnostics;
  result.trajectory.times_ns.push_back(0.0);
  result.trajectory.excitation.push_back(excitation_probabilities(result.final_state));

  HamiltonianSlice previous;
  Mpo mpo;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto start = clock::now();
    HamiltonianSlice slice = schedule[k];
    if (k == 0 || slice.omega != previous.omega || slice.delta != previous.delta || slice.phase != previous.phase) {
      mpo = rydberg_mpo(slice, ordering, kMpoTolerance);
      diag.max_mpo_bond = std::max(diag.max_mpo_bond, mpo.max_bond_dim());
      previous = std::move(slice);
    }
    const SweepStats stats =
        tdvp_sweep(result.final_state, mpo, 1e-3 * static_cast<double>(schedule.duration_ns(k)), params);
    diag.max_chi = std::max(diag.max_chi, stats.max_chi);
    diag.discarded_weight_cumulative += stats.discarded_weight;
    diag.max_norm_drift = std::max(diag.max_norm_drift, stats.norm_drift);
    diag.step_max_chi.push_back(stats.max_chi);
    if (stats.resource_limit && !diag.resource_limit) {
      diag.resource_limit = true;
      diag.warnings.push_back("bond dimension reached max-bond-dim " + std::to_string(config.max_bond_dim) +
                              " at t = " + std::to_string(schedule.end_ns(k)) +
                              " ns with discarded weight above the precision target");
    }
    result.trajectory.times_ns.push_back(static_cast<double>(schedule.end_ns(k)));
    result.trajectory.excitation.push_back(excitation_probabilities(result.final_state));
    diag.step_wall_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - start).count());
  }
  return result;
}

}  // namespace rydemu
