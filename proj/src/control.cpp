#include "singheat/control.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace singheat {

namespace {

Propagator make_propagator(const Grid& g, const SpMat& A, const ControlSetup& s) {
  if (!(s.T > 0)) throw ConfigError("control horizon must be positive");
  if (s.steps < 1) throw ConfigError("control needs at least one time step");
  const double dt = s.T / s.steps;
  check_time_step(g, dt, s.scheme);
  return Propagator(A, dt, s.scheme);
}

SpMat checked_operator(const Grid& g, double mu) {
  const double mu_N = g.dim * g.dim / 4.0;
  if (mu > mu_N * (1 + 1e-12))
    throw SupercriticalError("mu = " + fmt(mu) + " exceeds the critical value " + fmt(mu_N));
  return assemble(g, mu, 0);
}

} // namespace

HumSolver::HumSolver(const Grid& g, const Region& omega, const ControlSetup& setup)
    : g_(&g), setup_(setup), A_(checked_operator(g, setup.mu)), P_(make_propagator(g, A_, setup)) {
  mask_ = VecX::Zero(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i)
    if (omega.contains(g.nodes[i])) mask_(static_cast<Eigen::Index>(i)) = 1;
  const int K = setup.steps;
  const double dt = P_.dt();
  q_.assign(static_cast<std::size_t>(K) + 1, dt);
  if (setup.scheme == Scheme::implicit_euler) {
    q_[0] = 0;
  } else {
    q_[0] = q_[static_cast<std::size_t>(K)] = 0.5 * dt;
  }
}

VecX HumSolver::forward(const VecX& v0, const std::vector<VecX>& F) const {
  const int K = setup_.steps;
  const double dt = P_.dt();
  const bool has = !F.empty();
  if (has && F.size() != static_cast<std::size_t>(K) + 1) throw ConfigError("control sequence has the wrong length");
  VecX v = v0;
  for (int n = 0; n < K; ++n) {
    VecX rhs = P_.explicit_part(v);
    if (has) {
      const auto& Fn = F[static_cast<std::size_t>(n)];
      const auto& Fn1 = F[static_cast<std::size_t>(n) + 1];
      if (setup_.scheme == Scheme::implicit_euler)
        rhs += dt * mask_.cwiseProduct(Fn1);
      else
        rhs += (0.5 * dt) * mask_.cwiseProduct(Fn + Fn1);
    }
    v = P_.resolvent(rhs);
  }
  return v;
}

VecX HumSolver::control_to_state(const std::vector<VecX>& F) const {
  return forward(VecX::Zero(static_cast<Eigen::Index>(g_->size())), F);
}

std::vector<VecX> HumSolver::controls_from(const VecX& wT) const {
  const int K = setup_.steps;
  const auto Ks = static_cast<std::size_t>(K);
  std::vector<VecX> w(Ks + 1);
  w[Ks] = wT;
  for (int j = K - 1; j >= 0; --j) w[static_cast<std::size_t>(j)] = P_.apply(w[static_cast<std::size_t>(j) + 1]);
  std::vector<VecX> F(Ks + 1);
  if (setup_.scheme == Scheme::implicit_euler) {
    F[0] = VecX::Zero(wT.size());
    for (std::size_t m = 1; m <= Ks; ++m) F[m] = mask_.cwiseProduct(w[m - 1]);
  } else {
    std::vector<VecX> z(Ks);
    for (std::size_t j = 0; j < Ks; ++j) z[j] = P_.resolvent(w[j + 1]);
    F[0] = mask_.cwiseProduct(z[0]);
    F[Ks] = mask_.cwiseProduct(z[Ks - 1]);
    for (std::size_t m = 1; m < Ks; ++m) F[m] = mask_.cwiseProduct(0.5 * (z[m] + z[m - 1]));
  }
  return F;
}

VecX HumSolver::gramian_apply(const VecX& wT) const { return control_to_state(controls_from(wT)); }

double HumSolver::control_norm2(const std::vector<VecX>& F) const {
  double s = 0;
  for (std::size_t m = 0; m < F.size(); ++m) s += q_[m] * F[m].squaredNorm();
  return s;
}

VecX HumSolver::adjoint_initial(const VecX& wT) const {
  VecX w = wT;
  for (int j = 0; j < setup_.steps; ++j) w = P_.apply(w);
  return w;
}

Eigen::MatrixXd HumSolver::gramian_dense(int workers) const {
  const auto n = static_cast<Eigen::Index>(g_->size());
  Eigen::MatrixXd G(n, n);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    VecX e = VecX::Zero(n);
    e(static_cast<Eigen::Index>(i)) = 1;
    G.col(static_cast<Eigen::Index>(i)) = gramian_apply(e);
  });
  return 0.5 * (G + G.transpose());
}

ControlResult hum_control(const HumSolver& hs, const VecX& v0, double epsilon, double cg_tol, int max_iter) {
  if (!(epsilon > 0)) throw ConfigError("penalty epsilon must be positive");
  ControlResult r;
  r.epsilon = epsilon;
  const VecX vfree = hs.forward(v0, {});
  r.free_terminal_norm = vfree.norm();
  const CgResult cg = conjugate_gradient([&](const VecX& w) -> VecX { return hs.gramian_apply(w) + epsilon * w; },
                                         -vfree, cg_tol, max_iter);
  r.wT = cg.x;
  r.iterations = cg.iterations;
  r.residuals = cg.residuals;
  r.control = hs.controls_from(r.wT);
  const VecX vT = hs.forward(v0, r.control);
  r.terminal_norm = vT.norm();
  r.predicted_terminal = epsilon * r.wT.norm();
  r.J = 0.5 * hs.control_norm2(r.control) + vT.squaredNorm() / (2 * epsilon);
  const double slack = 10 * cg_tol * r.free_terminal_norm + 1e-14 * r.free_terminal_norm;
  r.terminal_audit_ok = std::fabs(r.terminal_norm - r.predicted_terminal) <= slack;
  return r;
}

namespace {

struct QuotientPair {
  Eigen::MatrixXd E, B;
  double shift = 0;
};

QuotientPair quotient_pair(const HumSolver& hs, double eta_rel, int workers) {
  QuotientPair qp;
  const Eigen::MatrixXd G = hs.gramian_dense(workers);
  const double gn = G.norm();
  if (!(gn > 0)) throw DegenerateObservation("observation operator vanishes; the control region contains no nodes");
  const auto n = G.rows();
  Eigen::MatrixXd S(n, n);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    VecX e = VecX::Zero(n);
    e(static_cast<Eigen::Index>(i)) = 1;
    S.col(static_cast<Eigen::Index>(i)) = hs.adjoint_initial(e);
  });
  qp.E = S.transpose() * S;
  qp.E = 0.5 * (qp.E + qp.E.transpose()).eval();
  qp.shift = eta_rel * gn;
  qp.B = G + qp.shift * Eigen::MatrixXd::Identity(n, n);
  return qp;
}

} // namespace

ObservabilityResult observability_constant(const HumSolver& hs, double eta_rel, int workers) {
  const QuotientPair qp = quotient_pair(hs, eta_rel, workers);
  Eigen::LLT<Eigen::MatrixXd> llt(qp.B);
  if (llt.info() != Eigen::Success) throw SolverError("shifted Gramian is not positive definite");
  ObservabilityResult out;
  out.shift = qp.shift;
  // symmetric form L^{-1} E L^{-T}; powers taken by repeated squaring
  Eigen::MatrixXd M = llt.matrixL().solve(qp.E);
  M = llt.matrixL().solve(M.transpose().eval());
  M = 0.5 * (M + M.transpose()).eval();
  Eigen::MatrixXd P = M / M.norm();
  for (int k = 0; k < 40; ++k) {
    P = (P * P).eval();
    const double pn = P.norm();
    if (!(pn > 0)) throw DegenerateObservation("power iteration collapsed to zero");
    P /= pn;
    out.iterations = k + 1;
  }
  Eigen::Index col = 0;
  P.colwise().norm().maxCoeff(&col);
  VecX x = P.col(col).normalized();
  const double Mn = M.norm();
  double prev = 0;
  for (int it = 0; it < 200; ++it) {
    const VecX Mx = M * x;
    const double val = x.dot(Mx);
    if (!(val > 0)) throw DegenerateObservation("observed energy of the iterate is zero");
    out.value = val;
    out.residual = (Mx - val * x).norm() / Mn;
    if (out.residual <= 1e-10 || (it > 0 && std::fabs(val - prev) <= 1e-13 * val)) return out;
    prev = val;
    x = Mx.normalized();
  }
  throw SolverError("observability power iteration did not converge; residual " + fmt(out.residual));
}

double observability_constant_dense(const HumSolver& hs, double eta_rel, int workers) {
  const QuotientPair qp = quotient_pair(hs, eta_rel, workers);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(qp.E, qp.B);
  if (es.info() != Eigen::Success) throw SolverError("dense generalized eigensolve failed");
  return es.eigenvalues().maxCoeff();
}

double gramian_symmetry_residual(const HumSolver& hs, int probes, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(hs.grid().size());
  double worst = 0;
  for (int p = 0; p < probes; ++p) {
    VecX a(n), b(n);
    for (Eigen::Index i = 0; i < n; ++i) a(i) = rng.normal();
    for (Eigen::Index i = 0; i < n; ++i) b(i) = rng.normal();
    const double d = std::fabs(hs.gramian_apply(a).dot(b) - a.dot(hs.gramian_apply(b)));
    worst = std::max(worst, d / (a.norm() * b.norm()));
  }
  return worst;
}

std::vector<ScanRow> cost_scan(const Grid& g, const Region& omega, const VecX& v0, ScanParameter p,
                               const std::vector<double>& values, const ScanSetup& setup, int workers) {
  std::vector<ScanRow> rows(values.size());
  parallel_for(values.size(), workers, [&](std::size_t i) {
    ScanRow& row = rows[i];
    row.value = values[i];
    ControlSetup cs = setup.base;
    if (p == ScanParameter::mu)
      cs.mu = values[i];
    else
      cs.T = values[i];
    try {
      cs.steps = std::max(1, static_cast<int>(std::llround(cs.T / setup.dt)));
      const HumSolver hs(g, omega, cs);
      row.C_T = observability_constant(hs).value;
      const ControlResult r = hum_control(hs, v0, setup.epsilon, setup.cg_tol, setup.max_iter);
      row.terminal_norm = r.terminal_norm;
      row.iterations = r.iterations;
    } catch (const std::exception& e) {
      row.error = e.what();
      std::replace(row.error.begin(), row.error.end(), ',', ';');
    }
  });
  return rows;
}

void write_control_csv(std::ostream& os, const std::vector<std::pair<ControlSetup, ControlResult>>& runs) {
  os << "mu,T,epsilon,terminal_norm,free_terminal_norm,J,iterations\n";
  for (const auto& [s, r] : runs)
    os << fmt(s.mu) << ',' << fmt(s.T) << ',' << fmt(r.epsilon) << ',' << fmt(r.terminal_norm) << ','
       << fmt(r.free_terminal_norm) << ',' << fmt(r.J) << ',' << r.iterations << '\n';
}

void write_scan_csv(std::ostream& os, ScanParameter p, const std::vector<ScanRow>& rows) {
  os << (p == ScanParameter::mu ? "mu" : "T") << ",C_T,terminal_norm,iterations,error\n";
  for (const auto& r : rows)
    os << fmt(r.value) << ',' << fmt(r.C_T) << ',' << fmt(r.terminal_norm) << ',' << r.iterations << ',' << r.error
       << '\n';
}

} // namespace singheat
