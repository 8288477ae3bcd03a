#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "singheat/hardy.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

using namespace singheat;

namespace {

// smallest eigenvalue of K v = nu W v with W = diag(m_i/|x_i|^2), dense
double dense_hardy(const Grid& g) {
  const Eigen::MatrixXd K = Eigen::MatrixXd(g.K);
  const VecX d2 = g.dist2();
  VecX w(static_cast<Eigen::Index>(g.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = g.mass[static_cast<std::size_t>(i)] / d2(i);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::MatrixXd(w.asDiagonal()));
  return es.eigenvalues()(0);
}

} // namespace

TEST_CASE("discrete Hardy constant agrees with a dense generalized eigensolve") {
  for (int cells : {40, 120}) {
    const Grid g = interval_grid(1, cells);
    EigenPair ep;
    const double mu = best_hardy_constant(g, 0, &ep);
    CHECK(mu == doctest::Approx(dense_hardy(g)).epsilon(1e-9));
    CHECK(ep.residual <= 1e-8);
  }
  const Grid d = disk_ring_grid(1, 8, true, 2);
  CHECK(best_hardy_constant(d) == doctest::Approx(dense_hardy(d)).epsilon(1e-8));
}

TEST_CASE("weighted forms reduce to the plain ones at zero power") {
  const Grid g = disk_ring_grid(1, 6, true);
  const VecX m = weighted_mass(g, 0);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(m(static_cast<Eigen::Index>(i)) == doctest::Approx(g.mass[i]));
  CHECK((Eigen::MatrixXd(weighted_stiffness(g, 0)) - Eigen::MatrixXd(g.K)).norm() <= 1e-12 * Eigen::MatrixXd(g.K).norm());
  const VecX d2 = g.dist2();
  const VecX m2 = weighted_mass(g, 2);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(m2(static_cast<Eigen::Index>(i)) == doctest::Approx(g.mass[i] / d2(static_cast<Eigen::Index>(i))));
}

TEST_CASE("boundary Hardy constants on the interval decrease toward one quarter") {
  std::vector<Grid> grids;
  for (int c : {50, 100, 200, 400}) grids.push_back(interval_grid(1, c));
  const HardyReport r = hardy_study(grids, Placement::boundary);
  CHECK(r.N == 1);
  CHECK(r.monotone);
  CHECK(r.residuals_ok);
  CHECK(r.dominates);
  CHECK(r.positive_ground_state);
  for (std::size_t i = 1; i < r.levels.size(); ++i) CHECK(r.levels[i].constant < r.levels[i - 1].constant);
  CHECK(r.levels.back().constant > 0.25);
  CHECK(r.fit_intercept < r.levels.back().constant);
}

TEST_CASE("boundary placement beats interior placement on matched disk meshes") {
  std::vector<Grid> b, i;
  for (int n : {16, 32}) {
    b.push_back(disk_ring_grid(1, n, true, 2));
    i.push_back(disk_ring_grid(1, n, false, 2));
  }
  const HardyReport rb = hardy_study(b, Placement::boundary);
  const HardyReport ri = hardy_study(i, Placement::interior);
  CHECK(rb.N == 2);
  CHECK(rb.dominates);
  CHECK(rb.levels.back().constant > 1.0);
  CHECK(ri.levels.back().constant < 0.5);
  CHECK(ri.monotone);
}

TEST_CASE("shift constant C0 is the smallest admissible value") {
  const Grid g = interval_grid(1, 128);
  const C0Result c = estimate_C0_gamma(g, 1.5, 0.25);
  CHECK(c.value > 0);
  CHECK(c.nu >= 1 - 1e-9);
  // just below the returned value the quotient drops under one
  const EigenPair below = hardy_eigenpair(g, 1.5, 0.25, c.value * (1 - 1e-3));
  CHECK(below.value < 1);
  CHECK(estimate_C0_gamma(g, 1.5, 0).value == 0);
  CHECK(estimate_C0_gamma(g, 0, 0).value == 0);
  C0Options tight;
  tight.cap = 1e-3;
  CHECK_THROWS_AS(estimate_C0_gamma(g, 1.5, 0.25, tight), CapExceeded);
}

TEST_CASE("inequality checks on random fields") {
  const Grid g = interval_grid(1, 128);
  const double gamma = 1.5;
  const HardyForms forms(g, gamma);
  const C0Result c0 = estimate_C0_gamma(g, gamma, 0.25);
  InequalityConstants ic;
  ic.gamma = gamma;
  ic.mu = 0.25;
  ic.C0 = c0.value;
  ic.C1 = c0.value;
  CHECK(check_inequality(forms, InequalityId::hardy_c1, ic, 200, 3).pass());
  const TwoConstantFit fit = fit_two_constants(g, gamma, 0.25);
  ic.C2 = fit.C2;
  ic.C3 = fit.C3;
  CHECK(fit.C3 > 0);
  CHECK(fit.C2 <= 1e3);
  CHECK_FALSE(fit.rows.empty());
  CHECK(check_inequality(forms, InequalityId::two_constant, ic, 200, 4).pass());
  for (double mu : {0.25, 0.1, -0.5}) {
    ic.mu = mu;
    CHECK(check_inequality(forms, InequalityId::norm_equivalence, ic, 200, 5).pass());
  }
}

TEST_CASE("dropping the shift breaks the weighted Hardy inequality") {
  const Grid g = interval_grid(1, 128);
  const HardyForms forms(g, 1.5);
  InequalityConstants ic;
  ic.gamma = 1.5;
  ic.mu = 0.25;
  ic.C1 = 0;
  // worst field: smallest eigenvector of grad against wg + mu w2, built densely
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd K = Eigen::MatrixXd(g.K);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    VecX e = VecX::Zero(n);
    e(i) = 1;
    const QuadForms q = forms.eval(e);
    B(i, i) = q.wg + ic.mu * q.w2;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, B);
  REQUIRE(es.info() == Eigen::Success);
  CHECK(es.eigenvalues()(0) < 1);
  const VecX u = es.eigenvectors().col(0);
  double lhs = 0, rhs = 0;
  inequality_sides(InequalityId::hardy_c1, ic, forms.eval(u), lhs, rhs);
  CHECK(rhs < lhs);
  ic.C1 = 10;
  inequality_sides(InequalityId::hardy_c1, ic, forms.eval(u), lhs, rhs);
  CHECK(rhs >= lhs);
}

TEST_CASE("quadratic forms match their definitions") {
  const Grid g = interval_grid(1, 64);
  const HardyForms forms(g, 1.5);
  const VecX u = random_field(g.size(), 11);
  CHECK(u == random_field(g.size(), 11));
  CHECK(u != random_field(g.size(), 12));
  const QuadForms q = forms.eval(u);
  CHECK(q.grad == doctest::Approx(u.dot(g.K * u)));
  double l2 = 0, w2 = 0, wg = 0;
  const VecX d2 = g.dist2();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double m = g.mass[static_cast<std::size_t>(i)];
    l2 += m * u(i) * u(i);
    w2 += m * u(i) * u(i) / d2(i);
    wg += m * u(i) * u(i) * std::pow(d2(i), -0.75);
  }
  CHECK(q.l2 == doctest::Approx(l2));
  CHECK(q.w2 == doctest::Approx(w2));
  CHECK(q.wg == doctest::Approx(wg));
}

TEST_CASE("one-dimensional supersolution remainder equals one quarter") {
  // for phi = x^{1/2} log(1/x)^{1/2}: -phi'' - phi/(4x^2) = phi / (4 x^2 log(1/x)^2)
  const PhiCheck pc = appendix_phi_check(Geometry::interval(1));
  CHECK(pc.pass());
  CHECK(pc.samples.size() == 200);
  CHECK(pc.fitted_constant == doctest::Approx(0.25).epsilon(1e-3));
  for (const auto& s : pc.samples) CHECK(s.remainder == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("two-dimensional supersolution margins are nonnegative") {
  PhiOptions o;
  o.r1 = 0.1;
  const PhiCheck pc = appendix_phi_check(Geometry::tangent_disk(1), o);
  CHECK(pc.N == 2);
  CHECK(pc.failures == 0);
  CHECK(pc.min_margin >= 0);
  CHECK(pc.fitted_constant > 0);
  for (std::size_t i = 1; i < pc.samples.size(); ++i) CHECK(pc.samples[i].r < pc.samples[i - 1].r);
}

TEST_CASE("the distance factor is needed for the supersolution") {
  PhiOptions o;
  o.suppress_rho = true;
  const PhiCheck pc = appendix_phi_check(Geometry::interval(1), o);
  CHECK_FALSE(pc.pass());
  CHECK(pc.failures > 0);
}

TEST_CASE("hardy csv layout") {
  std::vector<HardyRow> rows;
  rows.push_back({"fit", 1, 2, 0.01, 0.3, 1e-12});
  std::ostringstream os;
  write_hardy_csv(os, rows);
  CHECK(os.str().rfind("case,N,gamma,h,constant,residual\n", 0) == 0);
  CHECK(os.str().find("fit,1,2,0.01,0.3,1e-12\n") != std::string::npos);
}
