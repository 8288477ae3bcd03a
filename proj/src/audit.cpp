#include "singheat/audit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace singheat {

namespace {

enum CheckId {
  kEulerDefect,
  kX2HessNonneg,
  kX2LapNonneg,
  kX2HessBound,
  kX2LapBound,
  kPhiHessNear,
  kPhiLapLower,
  kPhiHessGlobal,
  kIdentity,
  kT1LowerNear,
  kT1LowerBulk,
  kT1Core,
  kT2LowerNear,
  kT2NonnegFar,
  kT3Lower,
  kT3Upper,
  kGradLowerNear,
  kGradLowerBulk,
  kGradUpperCore,
  kBoundarySign,
  kSigmaPositive,
  kNumChecks
};

struct CheckInfo {
  const char* id;
  const char* region;
};

constexpr CheckInfo kChecks[kNumChecks] = {
    {"euler_defect_bound", "domain"},
    {"x2_hessian_nonneg", "near_singularity"},
    {"x2_laplacian_nonneg", "near_singularity"},
    {"x2_hessian_bound", "domain"},
    {"x2_laplacian_bound", "domain"},
    {"phi_hessian_near", "near_singularity"},
    {"phi_laplacian_lower", "outside_core_closure"},
    {"phi_hessian_global", "domain"},
    {"t_identity_residual", "domain"},
    {"t1_lower_near", "near_singularity"},
    {"t1_lower_bulk", "bulk"},
    {"t1_bounded_core", "control_core"},
    {"t2_lower_near", "near_singularity"},
    {"t2_nonneg_far", "away_from_singularity"},
    {"t3_lower", "outside_core_closure"},
    {"t3_upper", "domain"},
    {"gradient_lower_near", "near_singularity"},
    {"gradient_lower_bulk", "bulk"},
    {"gradient_upper_core", "control_core"},
    {"boundary_sign", "boundary"},
    {"sigma_positive", "closed_domain"},
};

struct Eval {
  bool applicable = false;
  bool violated = false;
  XReal margin;
};

struct PointFlags {
  double r = 0;
  bool near = false, core = false, outside_core_closure = false, bulk = false, far = false;
};

PointFlags flags_for(const AuditContext& ctx, const Vec& x) {
  PointFlags f;
  f.r = x.norm();
  const double r0 = ctx.regions.r0;
  f.near = f.r < r0;
  f.core = ctx.regions.omega0.contains(x);
  f.outside_core_closure = !ctx.regions.omega0.closure_contains(x);
  f.bulk = !f.near && f.outside_core_closure;
  f.far = f.r > r0;
  return f;
}

std::vector<Vec> directions(int dim, int n, double offset) {
  std::vector<Vec> d;
  if (dim == 1) {
    d.push_back(Vec(1, 0));
    d.push_back(Vec(-1, 0));
    return d;
  }
  d.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double t = M_PI * (j + offset) / n;
    d.push_back(Vec(std::cos(t), std::sin(t)));
  }
  return d;
}

Eval judge(const XReal& lhs, const XReal& rhs, double rel) {
  Eval e;
  e.applicable = true;
  e.margin = lhs - rhs;
  const XReal scale = max(lhs.abs(), rhs.abs());
  e.violated = e.margin < XReal(rel) * scale;
  return e;
}

// Directional check of a * q(xi) >= a * c with a > 0; returns the worst direction.
Eval judge_dirs(const XReal& a, const std::vector<double>& q, double c, double rel) {
  double worst = std::numeric_limits<double>::infinity();
  std::size_t wi = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double s = std::max(std::fabs(q[i]), std::fabs(c));
    const double m = s > 0 ? (q[i] - c) / s : 0.0;
    if (m < worst) {
      worst = m;
      wi = i;
    }
  }
  return judge(a * XReal(q[wi]), a * XReal(c), rel);
}

} // namespace

TTerms t_terms(const CarlemanWeight& w, const Vec& x) {
  const TauJet tj = w.tau(x);
  const int N = tj.dim;
  const double lam = tj.lambda;
  const double al = w.alpha(x);
  const double r2 = tj.r2;
  const double psi = tj.psi.value;
  const Vec& g = tj.psi.grad;
  const Mat& H = tj.psi.hess;
  const double xg = tj.psi.x_dot_grad;
  const double lpsi = tj.psi.lap;
  const double gg = g.squaredNorm();
  const double cross = x(0) * g(1) - x(1) * g(0);
  const double K = N == 1 ? 0.0 : cross * cross;

  const ScaledVec gt = tj.grad();
  const Vec& v = gt.v;
  const XReal S2 = gt.scale * gt.scale;
  const double vv = v.squaredNorm();
  const double vHv = v.dot(H * v);
  const XReal& P = tj.P;

  TTerms t;
  t.grad_sq = S2 * XReal(vv);
  const XReal hform = XReal(v.dot(tj.x2_hess * v)) + P * XReal(v.dot(tj.n_hess * v));
  t.lhs = S2 * (XReal(2.0) * hform - XReal(al * vv) * tj.lap());

  const double c1 = 2 * psi * (2 - al * N) + 4 * (2 - al) * xg - al * r2 * lpsi;
  t.t1 = S2 * XReal(c1 * vv + 2 * r2 * vHv);

  const XReal lP = XReal(lam) * P;
  const XReal Pr2 = P * XReal(r2);
  const XReal first = XReal(8 * K) * (XReal(1.0) + lP) * (XReal(2 * psi * r2) + lP * XReal(r2));
  const XReal second = XReal(K) * (XReal(4 * lam * lam * lam) * P * P * Pr2 + XReal(8 * lam * lam) * P * Pr2 +
                                   XReal(8 * lam * lam * psi * (1 - psi)) * Pr2 - XReal(2 * lam * (lam - 2)) * Pr2);
  t.t2 = first + second;

  const double c0 = (2 - al) * lam * lam - lam * (2 + al * N - 2 * al);
  const double c3 = c0 + 2 * lam * lam * (2 - al) * xg - al * lam * r2 * lpsi + (2 - al) * lam * lam * r2 * gg;
  t.t3 = P * S2 * XReal(c3 * vv + 2 * lam * r2 * vHv);
  return t;
}

double identity_residual(const TTerms& t) {
  const XReal diff = (t.lhs - (t.t1 + t.t2 + t.t3)).abs();
  return XReal::ratio(diff, XReal(1.0) + t.lhs.abs());
}

XReal boundary_sign_value(const CarlemanWeight& w, const Geometry& g, const Vec& p) {
  const Vec n = g.outward_normal(p);
  const TauJet tj = w.tau(p);
  return -tj.grad().dot(n);
}

std::vector<AuditSample> make_audit_samples(const AuditContext& ctx, const AuditOptions& opt, std::uint64_t seed) {
  const Geometry& g = ctx.geometry;
  const double r0 = ctx.regions.r0;
  const Region& w0 = ctx.regions.omega0;
  Rng rng(seed);
  std::vector<AuditSample> out;
  auto push = [&](const Vec& x, bool bd) {
    AuditSample s;
    s.x = x;
    s.boundary = bd;
    s.dir_offset = rng.uniform();
    out.push_back(s);
  };

  const std::size_t cap = 200;
  for (std::size_t i = 0, tries = 0; i < opt.n_near && tries < cap * opt.n_near; ++tries) {
    Vec x;
    if (g.dim() == 1) {
      x = Vec(r0 * rng.uniform(), 0);
    } else {
      const double r = r0 * std::sqrt(rng.uniform());
      const double t = M_PI * rng.uniform();
      x = r * Vec(std::cos(t), std::sin(t));
    }
    if (x.norm() > 0 && x.norm() < r0 && g.contains(x) && !g.on_boundary(x, 0.0)) {
      push(x, false);
      ++i;
    }
  }
  for (std::size_t i = 0, tries = 0; i < opt.n_bulk && tries < cap * opt.n_bulk; ++tries) {
    const Vec x = g.sample_interior(rng);
    if (x.norm() > r0 && !w0.closure_contains(x) && g.distance_to_boundary(x) > 0) {
      push(x, false);
      ++i;
    }
  }
  for (std::size_t i = 0, tries = 0; i < opt.n_core && tries < cap * opt.n_core; ++tries) {
    Vec x;
    if (w0.shape == Region::Shape::interval) {
      x = Vec(rng.uniform(w0.lo, w0.hi), 0);
    } else {
      const double r = w0.radius * std::sqrt(rng.uniform());
      const double t = 2 * M_PI * rng.uniform();
      x = w0.center + r * Vec(std::cos(t), std::sin(t));
    }
    if (w0.contains(x) && g.contains(x) && g.distance_to_boundary(x) > 0) {
      push(x, false);
      ++i;
    }
  }
  // log-radial cloud around the singular point, inside and beyond r0
  const int nang = g.dim() == 1 ? 1 : 16;
  std::vector<double> radii;
  for (int j = 20; j >= 1; --j) radii.push_back(std::ldexp(r0, -j));
  for (int j = 0; j <= 200; ++j) {
    const double r = std::ldexp(r0, j);
    if (r >= g.r_omega()) break;
    radii.push_back(r);
  }
  for (double r : radii) {
    for (int k = 0; k < nang; ++k) {
      const Vec x = g.dim() == 1 ? Vec(r, 0) : Vec(r * std::cos(M_PI * (k + 0.5) / nang), r * std::sin(M_PI * (k + 0.5) / nang));
      if (g.contains(x) && g.distance_to_boundary(x) > 0) push(x, false);
    }
  }
  for (const Vec& p : g.boundary_samples(opt.n_boundary)) push(p, true);
  return out;
}

namespace {

struct ConstCandidates {
  double d1 = 0;
  double d5 = -std::numeric_limits<double>::infinity();
  double d6 = 0;
  double d7 = -std::numeric_limits<double>::infinity();
  double d8 = 0;
};

double pad(double sup) { return 1.1 * std::max(0.0, sup); }

} // namespace

AuditConstants estimate_constants(const AuditContext& ctx, const CarlemanWeight& w, const std::vector<AuditSample>& samples,
                                  const AuditOptions& opt) {
  const int dim = ctx.geometry.dim();
  const double lam = w.params().lambda;
  std::vector<ConstCandidates> slot(samples.size());
  parallel_for(samples.size(), opt.workers, [&](std::size_t i) {
    const AuditSample& s = samples[i];
    if (s.boundary) return;
    const PointFlags f = flags_for(ctx, s.x);
    const TauJet tj = w.tau(s.x);
    ConstCandidates c;
    for (const Vec& xi : directions(dim, opt.directions, s.dir_offset))
      c.d1 = std::max(c.d1, std::fabs(xi.dot(tj.x2_hess * xi)));
    c.d1 = std::max(c.d1, std::fabs(tj.x2_lap));
    const TTerms t = t_terms(w, s.x);
    if (!t.grad_sq.is_zero()) {
      if (f.bulk) c.d5 = XReal::ratio(-t.t1, t.grad_sq);
      if (f.core) c.d6 = XReal::ratio(t.t1.abs(), t.grad_sq);
      if (!tj.P.is_zero()) {
        c.d7 = XReal::ratio(t.t3, XReal(lam * lam) * tj.P * t.grad_sq);
        const double r2 = tj.r2;
        if (f.core) c.d8 = XReal::ratio(t.grad_sq, XReal(lam * lam * r2 * r2) * tj.P * tj.P);
      }
    }
    slot[i] = c;
  });
  ConstCandidates m;
  for (const auto& c : slot) {
    m.d1 = std::max(m.d1, c.d1);
    m.d5 = std::max(m.d5, c.d5);
    m.d6 = std::max(m.d6, c.d6);
    m.d7 = std::max(m.d7, c.d7);
    m.d8 = std::max(m.d8, c.d8);
  }
  AuditConstants out;
  out.D1 = pad(m.d1);
  out.D5 = pad(m.d5);
  out.D6 = pad(m.d6);
  out.D7 = pad(m.d7);
  out.D8 = pad(m.d8);
  const double r0 = ctx.regions.r0, R = ctx.geometry.r_omega();
  out.D4 = (3 + ctx.kit.d2psi_sup() * R * R) / (r0 * r0);
  return out;
}

std::vector<CheckRecord> run_checks(const AuditContext& ctx, const CarlemanWeight& w, const std::vector<AuditSample>& samples,
                                    const AuditConstants& c, const AuditOptions& opt) {
  const int dim = ctx.geometry.dim();
  const double lam = w.params().lambda;
  if (lam < 6) throw HypothesisError("the near-singularity Hessian bound for the phi part requires lambda >= 6");
  const double r0 = ctx.regions.r0;
  const double rel = opt.rel_margin;
  const double delta = ctx.kit.delta, D = ctx.kit.D;
  const double dpsi = ctx.kit.dpsi_sup();
  const XReal C = w.params().C_lambda;
  const double lam2 = lam * lam;
  const double d4_term = lam * c.D4 * r0 * r0;

  std::vector<std::array<Eval, kNumChecks>> slot(samples.size());
  parallel_for(samples.size(), opt.workers, [&](std::size_t i) {
    const AuditSample& s = samples[i];
    auto& e = slot[i];
    const Vec& x = s.x;
    if (s.boundary) {
      e[kBoundarySign] = judge(boundary_sign_value(w, ctx.geometry, x), XReal(0.0), rel);
      e[kSigmaPositive] = judge(C - w.tau(x).value(), XReal(1.0), rel);
      return;
    }
    const PointFlags f = flags_for(ctx, x);
    const TauJet tj = w.tau(x);
    const double r2 = tj.r2;
    const XReal& P = tj.P;

    e[kEulerDefect] = judge(XReal(delta * D * r2), XReal(std::fabs(tj.psi.scaled_euler_defect)), rel);

    std::vector<double> qx2, qn;
    for (const Vec& xi : directions(dim, opt.directions, s.dir_offset)) {
      qx2.push_back(xi.dot(tj.x2_hess * xi));
      qn.push_back(xi.dot(tj.n_hess * xi));
    }
    if (f.near) {
      e[kX2HessNonneg] = judge_dirs(XReal(1.0), qx2, 0.0, rel);
      e[kX2LapNonneg] = judge(XReal(tj.x2_lap), XReal(0.0), rel);
      e[kPhiHessNear] = judge_dirs(P, qn, 0.5 * lam * r0 * r0, rel);
    }
    {
      std::vector<double> neg(qx2.size());
      for (std::size_t k = 0; k < qx2.size(); ++k) neg[k] = -std::fabs(qx2[k]);
      e[kX2HessBound] = judge_dirs(XReal(1.0), neg, -c.D1, rel);
      e[kX2LapBound] = judge(XReal(c.D1), XReal(std::fabs(tj.x2_lap)), rel);
    }
    if (f.outside_core_closure) e[kPhiLapLower] = judge(P * XReal(tj.n_lap), P * XReal(lam2 * r2), rel);
    e[kPhiHessGlobal] = judge_dirs(P, qn, -d4_term, rel);

    const TTerms t = t_terms(w, x);
    {
      const XReal diff = (t.lhs - (t.t1 + t.t2 + t.t3)).abs();
      e[kIdentity] = judge(XReal(1e-9) * (XReal(1.0) + t.lhs.abs()), diff, 0.0);
    }
    const XReal& g2 = t.grad_sq;
    if (f.near) {
      e[kT1LowerNear] = judge(t.t1, g2, rel);
      const double psi = tj.psi.value;
      e[kT2LowerNear] = judge(t.t2, -(P * XReal(dpsi * dpsi * (8 * lam2 * psi * psi + 2 * lam2) * r2 * r2)), rel);
      e[kGradLowerNear] = judge(g2, XReal(r2), rel);
    }
    if (f.bulk) {
      e[kT1LowerBulk] = judge(t.t1, -(XReal(c.D5) * g2), rel);
      e[kGradLowerBulk] = judge(g2, XReal(lam2 * r2 * r2) * P * P, rel);
    }
    if (f.core) {
      e[kT1Core] = judge(XReal(c.D6) * g2, t.t1.abs(), rel);
      e[kGradUpperCore] = judge(XReal(c.D8 * lam2 * r2 * r2) * P * P, g2, rel);
    }
    if (f.far) e[kT2NonnegFar] = judge(t.t2, XReal(0.0), rel);
    if (f.outside_core_closure) e[kT3Lower] = judge(t.t3, XReal(lam2) * (P + P * XReal(r2)) * g2, rel);
    e[kT3Upper] = judge(XReal(c.D7 * lam2) * P * g2, t.t3, rel);
    e[kSigmaPositive] = judge(C - tj.value(), XReal(1.0), rel);
  });

  std::vector<CheckRecord> recs(kNumChecks);
  for (int k = 0; k < kNumChecks; ++k) {
    recs[k].id = kChecks[k].id;
    recs[k].region = kChecks[k].region;
    recs[k].lambda = lam;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (int k = 0; k < kNumChecks; ++k) {
      const Eval& e = slot[i][k];
      if (!e.applicable) continue;
      CheckRecord& r = recs[k];
      ++r.n_samples;
      if (e.violated) ++r.violations;
      if (!r.has_margin || e.margin < r.min_margin) {
        r.min_margin = e.margin;
        r.worst_x = samples[i].x;
        r.has_margin = true;
      }
    }
  }
  return recs;
}

const CheckRecord* AuditReport::find(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return &c;
  return nullptr;
}

std::string AuditReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.pass()) return c.id;
  return "";
}

AuditReport audit_at_lambda(const AuditContext& ctx, double lambda, const AuditOptions& opt) {
  WeightParams wp;
  wp.lambda = lambda;
  wp.gamma = ctx.gamma;
  wp.s = ctx.s;
  wp.T = ctx.T;
  wp.r0 = ctx.regions.r0;
  wp.C_lambda = opt.C_lambda_override > 0 ? XReal(opt.C_lambda_override)
                                          : choose_C_lambda(lambda, ctx.kit, ctx.geometry, wp.r0, opt.seed ^ 0x9e37ULL);
  const CarlemanWeight w(ctx.kit, wp);

  const auto set_a = make_audit_samples(ctx, opt, opt.seed * 2 + 1);
  const auto set_b = make_audit_samples(ctx, opt, opt.seed * 2 + 2);

  AuditReport rep;
  rep.lambda = lambda;
  rep.C_lambda = wp.C_lambda;
  rep.constants = estimate_constants(ctx, w, set_a, opt);
  rep.checks = run_checks(ctx, w, set_b, rep.constants, opt);
  rep.n_samples = set_b.size();
  for (const AuditSample& s : set_b)
    if (!s.boundary) rep.max_identity_residual = std::max(rep.max_identity_residual, identity_residual(t_terms(w, s.x)));
  rep.pass = std::all_of(rep.checks.begin(), rep.checks.end(), [](const CheckRecord& c) { return c.pass(); });
  return rep;
}

Lambda0Result find_lambda0(const AuditContext& ctx, const std::vector<double>& grid, const AuditOptions& opt) {
  if (grid.empty()) throw ConfigError("lambda grid is empty");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  Lambda0Result res;
  for (double lam : sorted) {
    AuditReport rep = audit_at_lambda(ctx, lam, opt);
    res.tried.push_back(rep);
    if (rep.pass) {
      res.lambda0 = lam;
      res.report = rep;
      return res;
    }
  }
  const AuditReport& last = res.tried.back();
  throw LambdaExhausted("no lambda in the grid passes; last failing check: " + last.first_failure() + " at lambda " +
                            fmt(last.lambda),
                        res.tried);
}

void write_audit_csv(std::ostream& os, const AuditReport& rep, int dim) {
  os << "check_id,region,lambda,n_samples,min_margin,violations,worst_x\n";
  for (const auto& c : rep.checks) {
    os << c.id << ',' << c.region << ',' << fmt(c.lambda) << ',' << c.n_samples << ','
       << (c.has_margin ? c.min_margin.str() : std::string("nan")) << ',' << c.violations << ','
       << (c.has_margin ? fmt_point(c.worst_x, dim) : std::string("")) << '\n';
  }
}

} // namespace singheat
