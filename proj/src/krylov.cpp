#include "rydemu/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rydemu/errors.hpp"

namespace rydemu {

namespace {

// exp(t·T)·e1 for the real symmetric tridiagonal T(alpha, beta).
Eigen::VectorXcd tridiagonal_exp_e1(const std::vector<double>& alpha, const std::vector<double>& beta,
                                    int m, std::complex<double> t) {
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    tri(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tri);
  const Eigen::MatrixXd& q = eig.eigenvectors();
  Eigen::VectorXcd coeff(m);
  for (int i = 0; i < m; ++i) coeff(i) = std::exp(t * eig.eigenvalues()(i)) * q(0, i);
  return q.cast<std::complex<double>>() * coeff;
}

}  // namespace

Eigen::VectorXcd local_exponential(const LinearMap& apply, const Eigen::VectorXcd& v, std::complex<double> tau,
                                   const KrylovOptions& options) {
  const double v_norm = v.norm();
  if (v_norm == 0.0 || tau == std::complex<double>(0.0)) return v;
  const int max_dim = std::max(1, options.max_dim);

  Eigen::VectorXcd w = v;
  double done = 0.0;  // fraction of tau already applied
  int substeps = 0;
  std::vector<Eigen::VectorXcd> basis;
  std::vector<double> alpha, beta;

  while (done < 1.0) {
    const double remaining = 1.0 - done;
    const double w_norm = w.norm();
    basis.clear();
    alpha.clear();
    beta.clear();
    basis.push_back(w / w_norm);

    int m = 0;
    bool exact = false;
    bool converged = false;
    double scale = 0.0;
    double last_beta = 0.0;
    for (int j = 0; j < max_dim; ++j) {
      Eigen::VectorXcd u = apply(basis[static_cast<std::size_t>(j)]);
      const double a = basis[static_cast<std::size_t>(j)].dot(u).real();
      u -= a * basis[static_cast<std::size_t>(j)];
      if (j > 0) u -= beta[static_cast<std::size_t>(j - 1)] * basis[static_cast<std::size_t>(j - 1)];
      for (const auto& b : basis) u -= b * b.dot(u);
      alpha.push_back(a);
      m = j + 1;
      last_beta = u.norm();
      scale = std::max({scale, std::abs(a), last_beta});
      if (last_beta <= 1e-13 * scale) {
        exact = true;
        break;
      }
      // the small eigensolve is not free; test every few vectors
      if (m % 4 == 0 || m == max_dim) {
        const Eigen::VectorXcd y = tridiagonal_exp_e1(alpha, beta, m, remaining * tau);
        if (last_beta * std::abs(y(m - 1)) < options.tol) {
          converged = true;
          break;
        }
      }
      beta.push_back(last_beta);
      if (j + 1 < max_dim) basis.push_back(u / last_beta);
    }

    double h = remaining;
    if (!exact && !converged) {
      // Shrink the step until the subspace built so far resolves it.
      for (;;) {
        h *= 0.5;
        if (++substeps > options.max_substeps)
          throw NoConvergence("Krylov exponential did not converge within dimension " + std::to_string(max_dim));
        const Eigen::VectorXcd y = tridiagonal_exp_e1(alpha, beta, m, h * tau);
        if (last_beta * std::abs(y(m - 1)) < options.tol) break;
      }
      // Bisect between the accepted h and the rejected 2h; the subspace
      // is the expensive part, so use as much of it as possible.
      double lo = h, hi = std::min(2.0 * h, remaining);
      for (int it = 0; it < 6; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::VectorXcd y = tridiagonal_exp_e1(alpha, beta, m, mid * tau);
        (last_beta * std::abs(y(m - 1)) < options.tol ? lo : hi) = mid;
      }
      h = lo;
    }
    const Eigen::VectorXcd y = tridiagonal_exp_e1(alpha, beta, m, h * tau);
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(w.size());
    for (int i = 0; i < m; ++i) next += y(i) * basis[static_cast<std::size_t>(i)];
    w = w_norm * next;
    done = (h == remaining) ? 1.0 : done + h;
  }
  return w;
}

}  // namespace rydemu
