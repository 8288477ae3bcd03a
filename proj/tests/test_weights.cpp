#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "weights_oracles.hpp"

#include <cmath>
#include <vector>

using namespace singheat;
using namespace oracle;

namespace {

constexpr double kTol = 1e-6;

} // namespace

TEST_CASE("psi, tau and sigma derivatives match finite differences on the tangent disk") {
  const SweepResult r = derivative_sweep(disk_setup(1), 21);
  CHECK(r.checked == 1000);
  CHECK(r.worst_psi < kTol);
  CHECK(r.worst_x2 < kTol);
  CHECK(r.worst_phi < kTol);
  CHECK(r.worst_sigma < kTol);
  CHECK(r.worst_identity < 1e-12);
}

TEST_CASE("psi, tau and sigma derivatives match finite differences on the interval") {
  // the profile is piecewise polynomial; stencils must not cross its junctions
  const SweepResult r = derivative_sweep(interval_setup(1), 22, {0.6, 0.7, 0.85});
  CHECK(r.checked == 1000);
  CHECK(r.worst_psi < kTol);
  CHECK(r.worst_x2 < kTol);
  CHECK(r.worst_phi < kTol);
  CHECK(r.worst_sigma < kTol);
  CHECK(r.worst_identity < 1e-12);
}

TEST_CASE("delta recipe equals a clause-by-clause recomputation") {
  CHECK(delta_recipe_mismatches(4, 1000) == 0);
  CHECK_THROWS_AS(choose_delta(DeltaInputs{}), ConfigError);
}

TEST_CASE("r0 recipe equals a clause-by-clause recomputation") {
  CHECK(r0_recipe_mismatches(5, 1000) == 0);
  R0Inputs bad;
  bad.dpsi = bad.d2psi = bad.psi = 1;
  bad.C3 = 1;
  bad.gamma = 2;
  CHECK_THROWS_AS(choose_r0(bad), ConfigError);
  bad.gamma = 1.5;
  bad.C3 = 0;
  CHECK_THROWS_AS(choose_r0(bad), ConfigError);
}

TEST_CASE("psi1 equals the boundary distance on its collar and exceeds the collar width inside") {
  for (const Setup& s : {disk_setup(0), interval_setup(0)}) {
    Rng rng(8);
    for (int i = 0; i < 2000; ++i) {
      const Vec x = s.g.sample_interior(rng);
      const double rho = s.g.distance_to_boundary(x);
      const double v = s.kit.psi1->eval(x).value;
      if (rho < s.kit.collar)
        CHECK(v == doctest::Approx(rho).epsilon(1e-10).scale(1));
      else
        CHECK(v >= s.kit.collar - 1e-12);
    }
    for (const Vec& c : s.kit.psi1->critical_points()) CHECK(s.regions.omega0.contains(c));
    CHECK(s.kit.delta >= 1);
    CHECK(s.kit.delta0 > 0);
  }
}

TEST_CASE("euler defect is x.grad psi1 - psi1 and is O(|x|^2)") {
  for (const Setup& s : {disk_setup(0), interval_setup(0)}) {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      const Vec x = s.g.sample_interior(rng);
      const ScalarJet j = s.kit.psi1->eval(x);
      CHECK(s.kit.psi1->euler_defect(x) == doctest::Approx(x.dot(j.grad) - j.value).scale(1e-12));
      CHECK(std::fabs(s.kit.psi1->euler_defect(x)) <= s.kit.D * x.squaredNorm() * (1 + 1e-12) + 1e-300);
      const PsiJet pj = s.kit.psi(x);
      CHECK(pj.scaled_euler_defect == doctest::Approx(pj.x_dot_grad - s.kit.delta * j.value).scale(1e-10));
    }
  }
}

TEST_CASE("selected delta matches its recipe and is recorded") {
  const Setup s = disk_setup(0);
  const RecipeChoice c = choose_delta(delta_inputs(s.kit, s.g));
  CHECK(s.kit.delta == c.value);
  CHECK(s.kit.delta_choice.binding == c.binding);
  CHECK_FALSE(s.kit.delta_overridden);
  const Setup o = disk_setup(3);
  CHECK(o.kit.delta == 3);
  CHECK(o.kit.delta_overridden);
}

TEST_CASE("sigma is positive on the closed domain once C_lambda is chosen") {
  const Setup s = disk_setup(0);
  WeightParams p;
  p.lambda = 8;
  p.r0 = choose_r0(r0_inputs(s.kit, 1.5, 0.2, 1)).value;
  p.C_lambda = choose_C_lambda(p.lambda, s.kit, s.g, p.r0);
  const CarlemanWeight w(s.kit, p);
  Rng rng(12);
  for (int i = 0; i < 2000; ++i) CHECK(w.sigma(0.5, s.g.sample_interior(rng)).value > XReal(0.0));
  for (const Vec& b : s.g.boundary_samples(500)) CHECK(w.sigma(0.5, b).value > XReal(0.0));
  CHECK_THROWS_AS(w.sigma(0.0, Vec(0, 1)), DomainError);
  CHECK_THROWS_AS(w.sigma(1.0, Vec(0, 1)), DomainError);
}

TEST_CASE("theta and its derivatives") {
  const Setup s = interval_setup(1);
  WeightParams p;
  p.gamma = 1.5;
  p.T = 2;
  const CarlemanWeight w(s.kit, p);
  CHECK(w.k() == doctest::Approx(1 + 2 / 1.5));
  for (double t : {0.1, 0.7, 1.0, 1.9}) {
    CHECK(w.theta(t) == doctest::Approx(std::pow(t * (2 - t), -w.k())));
    CHECK(w.theta_dt(t) == doctest::Approx(fd::diff([&](double u) { return w.theta(u); }, t, 1e-4)).epsilon(1e-7));
    CHECK(w.theta_dtt(t) == doctest::Approx(fd::diff([&](double u) { return w.theta_dt(u); }, t, 1e-4)).epsilon(1e-7));
  }
}

TEST_CASE("alpha cutoff values") {
  const Setup s = disk_setup(1);
  WeightParams p;
  p.r0 = 0.2;
  const CarlemanWeight w(s.kit, p);
  CHECK(w.alpha(Vec(0, 0.05)) == 0);
  CHECK(w.alpha(Vec(0, 0.3)) == doctest::Approx(0.5));
  const double mid = w.alpha(Vec(0, 0.15));
  CHECK(mid > 0);
  CHECK(mid < 0.5);
}

TEST_CASE("constant fixture has a vanishing gradient") {
  const PsiKit k = make_kit(std::make_shared<ConstantPsi1>(1.0), 1, 2.0);
  const PsiJet j = k.psi(Vec(0.3, 0));
  CHECK(j.value == doctest::Approx(4));
  CHECK(j.grad.norm() == 0);
}
