#include "singheat/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace singheat {

namespace {

bool ldlt_positive(const Eigen::SimplicialLDLT<SpMat>& f) {
  if (f.info() != Eigen::Success) return false;
  const VecX d = f.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (!(d(i) > 0)) return false;
  return true;
}

} // namespace

EigenPair smallest_eigenpair(const SpMat& A, const VecX& w, const LanczosOptions& opt) {
  const Eigen::Index n = A.rows();
  if (n == 0) throw SolverError("eigenproblem of size zero");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(w(i) > 0)) throw SolverError("weight matrix must be positive");
  const VecX dinv = w.cwiseSqrt().cwiseInverse();
  SpMat C = dinv.asDiagonal() * A * dinv.asDiagonal();
  C = 0.5 * (C + SpMat(C.transpose()));
  SpMat I(n, n);
  I.setIdentity();

  // lower the shift until C - sigma I is positive definite
  double sigma = 0;
  double step = 1;
  Eigen::SimplicialLDLT<SpMat> fact;
  for (int tries = 0;; ++tries) {
    fact.compute(C - sigma * I);
    if (ldlt_positive(fact)) break;
    if (tries > 200) throw SolverError("no positive definite shift found");
    sigma -= step;
    step *= 2;
  }

  const int m = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, n));
  VecX start = VecX::Ones(n);
  start.normalize();
  EigenPair out;
  out.shift = sigma;
  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    Eigen::MatrixXd Q(n, m + 1);
    std::vector<double> alpha, beta;
    Q.col(0) = start;
    int k = 0;
    for (; k < m; ++k) {
      VecX z = fact.solve(Q.col(k));
      const double a = Q.col(k).dot(z);
      alpha.push_back(a);
      // full reorthogonalization, twice
      for (int pass = 0; pass < 2; ++pass) z -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * z);
      const double b = z.norm();
      if (b <= 1e-14 * std::fabs(a) || k + 1 == m) {
        ++k;
        break;
      }
      beta.push_back(b);
      Q.col(k + 1) = z / b;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      T(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const VecX s = es.eigenvectors().col(k - 1);
    const double theta = es.eigenvalues()(k - 1);
    VecX y = Q.leftCols(k) * s;
    y.normalize();
    const double lam = y.dot(C * y);

    VecX v = dinv.cwiseProduct(y);
    v.normalize();
    if (v.sum() < 0) v = -v;
    const double res = (A * v - lam * w.cwiseProduct(v)).norm();
    out.value = lam;
    out.vec = v;
    out.residual = res;
    out.iterations = restart + 1;
    (void)theta;
    if (res <= opt.tol) return out;
    start = y;
  }
  throw SolverError("shift-invert Lanczos did not converge; residual " + fmt(out.residual));
}

CgResult conjugate_gradient(const std::function<VecX(const VecX&)>& apply, const VecX& b, double tol, int max_iter) {
  CgResult r;
  r.x = VecX::Zero(b.size());
  const double bn = b.norm();
  if (bn == 0.0) return r;
  VecX res = b;
  VecX p = res;
  double rr = res.squaredNorm();
  for (int it = 1; it <= max_iter; ++it) {
    const VecX Ap = apply(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0)) throw SolverError("conjugate gradient met a non-positive curvature direction");
    const double a = rr / pAp;
    r.x += a * p;
    res -= a * Ap;
    const double rr_new = res.squaredNorm();
    r.iterations = it;
    r.residuals.push_back(std::sqrt(rr_new) / bn);
    if (std::sqrt(rr_new) <= tol * bn) return r;
    p = res + (rr_new / rr) * p;
    rr = rr_new;
  }
  throw SolverError("conjugate gradient hit the iteration limit; relative residual " + fmt(r.residuals.back()));
}

} // namespace singheat
