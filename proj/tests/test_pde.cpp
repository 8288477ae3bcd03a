#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "singheat/pde.hpp"

#include <cmath>
#include <sstream>

using namespace singheat;

namespace {

// first Dirichlet eigenvalue of the unit disk, square of the first zero of J0
constexpr double kJ0Squared = 5.783185962946784;

double lumped_area(const Grid& g) {
  double s = 0;
  for (double m : g.mass) s += m;
  return s;
}

} // namespace

TEST_CASE("interval operator has the discrete sine spectrum") {
  const Grid g = interval_grid(2, 64);
  CHECK(g.size() == 63);
  CHECK(g.h == doctest::Approx(2.0 / 64));
  const SpMat A = assemble(g, 0, 0);
  const double lmin = smallest_eigenvalue(A);
  CHECK(lmin == doctest::Approx(4 / (g.h * g.h) * std::pow(std::sin(M_PI * g.h / 4), 2)).epsilon(1e-10));
}

TEST_CASE("potential enters as a diagonal -mu/|x|^2 and a shift C") {
  const Grid g = interval_grid(1, 40);
  const SpMat A0 = assemble(g, 0, 0), A1 = assemble(g, 0.2, 3);
  const VecX d2 = g.dist2();
  const Eigen::MatrixXd D = Eigen::MatrixXd(A1) - Eigen::MatrixXd(A0);
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    CHECK(D(i, i) == doctest::Approx(3 - 0.2 / d2(i)));
    for (Eigen::Index j = 0; j < D.cols(); ++j)
      if (j != i) CHECK(D(i, j) == 0);
  }
  CHECK((Eigen::MatrixXd(A1) - Eigen::MatrixXd(A1).transpose()).norm() == 0);
}

TEST_CASE("scaled and nodal variables are inverse maps") {
  const Grid g = disk_ring_grid(1, 6, true);
  Rng rng(2);
  VecX u(static_cast<Eigen::Index>(g.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
  CHECK((to_nodal(g, to_scaled(g, u)) - u).norm() <= 1e-14 * u.norm());
}

TEST_CASE("ring meshes: node counts, singular node and lumped area") {
  for (bool tangent : {true, false}) {
    const Grid g = disk_ring_grid(1, 16, tangent);
    std::size_t total = 1;
    for (int k = 1; k <= 16; ++k) total += static_cast<std::size_t>(6 * k);
    CHECK(g.all_nodes.size() == total);
    // unknowns: interior nodes, minus the pinned centre when it is the singular point
    CHECK(g.size() == total - 6 * 16 - (tangent ? 0 : 1));
    CHECK(g.singular_point.norm() == 0);
    for (const Vec& x : g.nodes) CHECK(x.norm() > 0);
    CHECK(lumped_area(g) < M_PI);
    CHECK(lumped_area(g) > 0.8 * M_PI);
  }
  const Grid t = disk_ring_grid(1, 4, true);
  bool origin_is_node = false;
  for (std::size_t i = 0; i < t.all_nodes.size(); ++i)
    if (t.all_nodes[i].norm() == 0) origin_is_node = t.unknown_of[i] == -1;
  CHECK(origin_is_node);
}

TEST_CASE("disk Dirichlet eigenvalue converges to the Bessel value") {
  double prev = 1e9;
  for (int n : {8, 16, 32}) {
    const Grid g = disk_ring_grid(1, n, true);
    const double l = smallest_eigenvalue(assemble(g, 0, 0));
    const double e = std::fabs(l - kJ0Squared);
    CHECK(e < prev);
    prev = e;
  }
  CHECK(prev / kJ0Squared < 0.01);
}

TEST_CASE("propagator acts on eigenvectors by its amplification factor") {
  const Grid g = interval_grid(1, 50);
  const SpMat A = assemble(g, 0.1, 0);
  const EigenPair ep = smallest_eigenpair(A, VecX::Ones(A.rows()));
  for (Scheme s : {Scheme::implicit_euler, Scheme::crank_nicolson}) {
    const Propagator P(A, 0.01, s);
    const VecX y = P.apply(ep.vec);
    CHECK((y - P.amplification(ep.value) * ep.vec).norm() <= 1e-8);
  }
}

TEST_CASE("time discretization orders: first for implicit Euler, second for Crank-Nicolson") {
  const Grid g = interval_grid(1, 64);
  const SpMat A = assemble(g, 0.2, 0);
  const EigenPair ep = smallest_eigenpair(A, VecX::Ones(A.rows()));
  const double T = 0.2;
  auto error = [&](Scheme s, int steps) {
    const Propagator P(A, T / steps, s);
    const Trajectory tr = solve_forward(P, ep.vec, steps);
    return (tr.v.back() - std::exp(-ep.value * T) * ep.vec).norm();
  };
  const double ie1 = error(Scheme::implicit_euler, 40), ie2 = error(Scheme::implicit_euler, 80);
  const double cn1 = error(Scheme::crank_nicolson, 40), cn2 = error(Scheme::crank_nicolson, 80);
  CHECK(ie1 / ie2 == doctest::Approx(2).epsilon(0.05));
  CHECK(cn1 / cn2 == doctest::Approx(4).epsilon(0.05));
}

TEST_CASE("forward march with a source matches a hand-rolled loop") {
  const Grid g = interval_grid(1, 30);
  const SpMat A = assemble(g, 0.1, 0);
  const auto n = static_cast<Eigen::Index>(g.size());
  auto F = [&](int k) { return VecX::Constant(n, std::sin(0.3 * k)); };
  for (Scheme s : {Scheme::implicit_euler, Scheme::crank_nicolson}) {
    const double dt = 0.01, a = s == Scheme::implicit_euler ? 1.0 : 0.5;
    const Propagator P(A, dt, s);
    const Trajectory tr = solve_forward(P, VecX::Ones(n), 12, F, 5);
    CHECK(tr.t.size() == 4); // 0, 5, 10, 12
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n), D = Eigen::MatrixXd(A);
    VecX v = VecX::Ones(n);
    for (int k = 0; k < 12; ++k) {
      const VecX src = s == Scheme::implicit_euler ? VecX(dt * F(k + 1)) : VecX(0.5 * dt * (F(k) + F(k + 1)));
      v = (I + a * dt * D).lu().solve((I - (1 - a) * dt * D) * v + src);
    }
    CHECK((tr.v.back() - v).norm() <= 1e-10 * v.norm());
    CHECK(tr.t.back() == doctest::Approx(0.12));
  }
}

TEST_CASE("adjoint march is the transpose of the forward march") {
  const Grid g = disk_ring_grid(1, 6, true);
  const SpMat A = assemble(g, 0.5, 0);
  const auto n = static_cast<Eigen::Index>(g.size());
  Rng rng(4);
  VecX v(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = rng.normal();
    w(i) = rng.normal();
  }
  for (Scheme s : {Scheme::implicit_euler, Scheme::crank_nicolson}) {
    const Propagator P(A, 0.01, s);
    const double lhs = solve_forward(P, v, 20).v.back().dot(w);
    const Trajectory adj = solve_adjoint(P, w, 20);
    CHECK(adj.v.back() == w);
    CHECK(std::fabs(lhs - v.dot(adj.v.front())) <= 1e-12 * v.norm() * w.norm());
  }
}

TEST_CASE("adjoint energy is monotone after the exponential correction") {
  for (double mu : {0.0, 0.2, 0.25}) {
    const Grid g = interval_grid(1, 128);
    const SpMat A = assemble(g, mu, 0);
    const Propagator P(A, 1e-3, Scheme::implicit_euler);
    const double c = growth_rate(P, smallest_eigenvalue(A));
    CHECK(c >= 0);
    Rng rng(5);
    VecX wT(static_cast<Eigen::Index>(g.size()));
    for (Eigen::Index i = 0; i < wT.size(); ++i) wT(i) = rng.normal();
    const EnergyCheck ec = energy_monotonicity_check(solve_adjoint(P, wT, 200), c, 0.2);
    CHECK(ec.monotone);
    CHECK(ec.integrated_ok);
    CHECK(ec.pass());
  }
}

TEST_CASE("energy check flags a trajectory that loses energy forward in time") {
  Trajectory tr;
  for (int k = 0; k <= 10; ++k) {
    tr.t.push_back(0.1 * k);
    tr.v.push_back(VecX::Constant(3, std::exp(-0.5 * k)));
  }
  const EnergyCheck ec = energy_monotonicity_check(tr, 0.0, 1.0);
  CHECK_FALSE(ec.monotone);
  CHECK_FALSE(ec.integrated_ok);
  CHECK(energy_monotonicity_check(tr, 6.0, 1.0).monotone);
}

TEST_CASE("growth rate follows the amplification of the smallest eigenvalue") {
  const Grid g = interval_grid(1, 10);
  const Propagator P(assemble(g, 0, 0), 0.1, Scheme::implicit_euler);
  CHECK(growth_rate(P, 1.0) == 0);
  CHECK(growth_rate(P, -2.0) == doctest::Approx(std::log(1 / 0.8) / 0.1));
  CHECK_THROWS_AS(growth_rate(P, -10.0), SolverError);
}

TEST_CASE("ratio classification") {
  auto rows = [](std::vector<double> r, bool cap_last = false) {
    std::vector<DichotomyRow> out;
    for (std::size_t i = 0; i < r.size(); ++i) {
      DichotomyRow d;
      d.level = static_cast<int>(i);
      d.ratio = r[i];
      out.push_back(d);
    }
    out.back().capped = cap_last;
    return out;
  };
  const double nan = std::nan("");
  CHECK(classify_ratios(rows({nan, 1.0, 1.01, 0.99})) == "stable");
  CHECK(classify_ratios(rows({nan, 1.0, 1.06})) == "inconclusive");
  CHECK(classify_ratios(rows({nan, 12, 1e5, INFINITY}, true)) == "blow-up trend");
  CHECK(classify_ratios(rows({nan, 1.0, 1.0}, true)) == "inconclusive");
  CHECK(classify_ratios(rows({nan, 12, 9})) == "inconclusive");
  CHECK(classify_ratios(rows({nan})) == "inconclusive");
}

TEST_CASE("small refinement study is stable without a potential") {
  BlowupOptions o;
  o.base_cells = 256;
  o.levels = 3;
  o.dt = 1e-4;
  o.t_probe = 0.01;
  const DichotomyReport r = blowup_experiment(0, o);
  CHECK(r.classification == "stable");
  CHECK(std::isnan(r.rows[0].ratio));
  std::ostringstream os;
  write_dichotomy_csv(os, r);
  CHECK(os.str().rfind("level,h,norm,ratio,classification\n", 0) == 0);
  o.levels = 1;
  CHECK_THROWS_AS(blowup_experiment(0, o), ConfigError);
}

TEST_CASE("time step validation and scheme names") {
  const Grid g = interval_grid(1, 10);
  CHECK_THROWS_AS(check_time_step(g, 0, Scheme::implicit_euler), ConfigError);
  CHECK_NOTHROW(check_time_step(g, 1.0, Scheme::implicit_euler));
  CHECK_THROWS_AS(check_time_step(g, 0.2, Scheme::crank_nicolson), ConfigError);
  CHECK_NOTHROW(check_time_step(g, 0.1, Scheme::crank_nicolson));
  CHECK(parse_scheme(to_string(Scheme::crank_nicolson)) == Scheme::crank_nicolson);
  CHECK(parse_scheme("implicit_euler") == Scheme::implicit_euler);
  CHECK_THROWS_AS(parse_scheme("rk4"), ConfigError);
}

TEST_CASE("trajectory csv lists nodal values") {
  const Grid g = interval_grid(1, 4);
  Trajectory tr;
  tr.t = {0, 0.5};
  tr.v = {to_scaled(g, VecX::Constant(3, 2.0)), to_scaled(g, VecX::Constant(3, 1.0))};
  std::ostringstream os;
  write_trajectory_csv(os, g, tr, 1);
  CHECK(os.str() == "t,node,value\n0,0,2\n0,1,2\n0,2,2\n0.5,0,1\n0.5,1,1\n0.5,2,1\n");
}
