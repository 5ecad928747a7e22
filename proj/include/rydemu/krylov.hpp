#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace rydemu {

struct KrylovOptions {
  double tol = 1e-12;
  int max_dim = 30;
  /// The time argument is split into at most this many pieces when a
  /// max_dim-sized subspace does not converge for the whole step.
  int max_substeps = 4096;
};

using LinearMap = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

/// exp(tau·A)·v for a Hermitian linear map A, by Lanczos with full
/// reorthogonalisation. Throws NoConvergence.
Eigen::VectorXcd local_exponential(const LinearMap& apply, const Eigen::VectorXcd& v, std::complex<double> tau,
                                   const KrylovOptions& options = {});

}  // namespace rydemu
