#pragma once

#include "singheat/common.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <vector>

namespace singheat {

using SpMat = Eigen::SparseMatrix<double>;
using VecX = Eigen::VectorXd;

struct EigenPair {
  double value = 0;
  VecX vec;            // generalized eigenvector, unit Euclidean norm
  double residual = 0; // |A v - value W v| / |v|
  int iterations = 0;  // Lanczos restarts
  double shift = 0;
};

struct LanczosOptions {
  int krylov_dim = 60;
  int max_restarts = 60;
  double tol = 1e-8;
};

// Smallest eigenpair of A v = mu W v with A symmetric and W a positive diagonal.
// Shift-invert Lanczos on W^{-1/2} A W^{-1/2} with full reorthogonalization.
EigenPair smallest_eigenpair(const SpMat& A, const VecX& w, const LanczosOptions& opt = {});

struct CgResult {
  VecX x;
  int iterations = 0;
  std::vector<double> residuals; // relative residual per iteration
};

// Conjugate gradient for a symmetric positive definite operator; throws
// SolverError when the iteration limit is reached.
CgResult conjugate_gradient(const std::function<VecX(const VecX&)>& apply, const VecX& b, double tol, int max_iter);

} // namespace singheat
