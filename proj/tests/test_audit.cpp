#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "singheat/audit.hpp"

#include <memory>
#include <sstream>

using namespace singheat;

namespace {

AuditContext disk_context() {
  const Geometry g = Geometry::tangent_disk(2);
  Regions r = make_regions(g, Region::make_ball(Vec(0, 2), 0.8), Region::make_ball(Vec(0, 2), 0.5));
  PsiKit kit = build_psi(g, r);
  r.r0 = choose_r0(r0_inputs(kit, 1.5, 0.2, 1.0)).value;
  return AuditContext{g, r, kit, 1.5, 1, 1};
}

const AuditContext& disk() {
  static const AuditContext ctx = disk_context();
  return ctx;
}

std::string csv(const AuditReport& rep, int dim) {
  std::ostringstream os;
  write_audit_csv(os, rep, dim);
  return os.str();
}

} // namespace

TEST_CASE("the three-term split of the weighted Hessian form is an identity") {
  const AuditContext& ctx = disk();
  for (double lam : {6.0, 12.0, 32.0}) {
    WeightParams p;
    p.lambda = lam;
    p.r0 = ctx.regions.r0;
    p.gamma = ctx.gamma;
    p.C_lambda = choose_C_lambda(lam, ctx.kit, ctx.geometry, p.r0);
    const CarlemanWeight w(ctx.kit, p);
    Rng rng(3);
    double worst = 0;
    for (int i = 0; i < 2000; ++i) worst = std::max(worst, identity_residual(t_terms(w, ctx.geometry.sample_interior(rng))));
    for (const Vec& x : ctx.geometry.collar_samples(500, 5)) worst = std::max(worst, identity_residual(t_terms(w, x)));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("tangent disk audit finds a finite lambda0 with no violations") {
  AuditOptions opt;
  const Lambda0Result res = find_lambda0(disk(), {6, 8, 12, 16, 24, 32}, opt);
  CHECK(res.report.pass);
  CHECK(res.report.n_samples >= 10000);
  CHECK(res.report.max_identity_residual <= 1e-9);
  for (const auto& c : res.report.checks) {
    CHECK_MESSAGE(c.violations == 0, c.id);
    CHECK_MESSAGE(c.n_samples > 0, c.id);
  }
  CHECK(res.report.find("boundary_sign") != nullptr);
  CHECK(res.report.find("no_such_check") == nullptr);
  CHECK(res.report.first_failure().empty());
  CHECK(res.tried.back().lambda == res.lambda0);
}

TEST_CASE("audit output repeats for a fixed seed and is independent of the worker count") {
  AuditOptions a;
  a.n_near = a.n_bulk = 1500;
  a.n_core = a.n_boundary = 500;
  AuditOptions b = a;
  b.workers = 3;
  const std::string x = csv(audit_at_lambda(disk(), 8, a), 2);
  CHECK(x == csv(audit_at_lambda(disk(), 8, a), 2));
  CHECK(x == csv(audit_at_lambda(disk(), 8, b), 2));
  a.seed = 2;
  CHECK(x != csv(audit_at_lambda(disk(), 8, a), 2));
}

TEST_CASE("audit csv layout") {
  AuditOptions a;
  a.n_near = a.n_bulk = a.n_core = a.n_boundary = 300;
  const std::string s = csv(audit_at_lambda(disk(), 8, a), 2);
  CHECK(s.rfind("check_id,region,lambda,n_samples,min_margin,violations,worst_x\n", 0) == 0);
  std::istringstream is(s);
  std::string line;
  int rows = -1;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(rows == 21);
}

TEST_CASE("a constant profile violates the boundary sign and the audit reports it") {
  const AuditContext& d = disk();
  PsiKit kit = make_kit(std::make_shared<ConstantPsi1>(1.0), 2, 1.0);
  AuditContext ctx{d.geometry, d.regions, kit, 1.5, 1, 1};
  AuditOptions a;
  a.n_near = a.n_bulk = a.n_core = a.n_boundary = 500;
  const AuditReport rep = audit_at_lambda(ctx, 8, a);
  CHECK_FALSE(rep.pass);
  REQUIRE(rep.find("boundary_sign") != nullptr);
  CHECK(rep.find("boundary_sign")->violations > 0);
  CHECK_FALSE(rep.first_failure().empty());
  try {
    find_lambda0(ctx, {8, 6}, a);
    FAIL("expected exhaustion");
  } catch (const LambdaExhausted& e) {
    REQUIRE(e.tried.size() == 2);
    CHECK(e.tried[0].lambda == 6);
    CHECK(e.report.lambda == 8);
  }
}

TEST_CASE("boundary sign value is positive along the tangent disk boundary") {
  const AuditContext& ctx = disk();
  WeightParams p;
  p.lambda = 8;
  p.r0 = ctx.regions.r0;
  p.C_lambda = choose_C_lambda(8, ctx.kit, ctx.geometry, p.r0);
  const CarlemanWeight w(ctx.kit, p);
  for (const Vec& b : ctx.geometry.boundary_samples(400)) {
    if (b.squaredNorm() == 0) continue;
    CHECK(boundary_sign_value(w, ctx.geometry, b) >= XReal(0.0));
  }
}

TEST_CASE("stratified samples cover every zone") {
  AuditOptions a;
  const auto s = make_audit_samples(disk(), a, 9);
  std::size_t near = 0, core = 0, bd = 0;
  for (const auto& x : s) {
    if (x.boundary) ++bd;
    else if (x.x.norm() < disk().regions.r0) ++near;
    else if (disk().regions.omega0.contains(x.x)) ++core;
  }
  CHECK(near > 0);
  CHECK(core > 0);
  CHECK(bd > 0);
  CHECK(s.size() >= 10000);
}

TEST_CASE("empty lambda grid is a configuration error") {
  CHECK_THROWS_AS(find_lambda0(disk(), {}, AuditOptions{}), ConfigError);
}
