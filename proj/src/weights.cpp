#include "singheat/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace singheat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// septic smoothstep and its antiderivative
double smooth7(double u) {
  if (u <= 0) return 0;
  if (u >= 1) return 1;
  const double u2 = u * u, u4 = u2 * u2;
  return u4 * (35 - 84 * u + 70 * u2 - 20 * u2 * u);
}
double smooth7_d(double u) {
  if (u <= 0 || u >= 1) return 0;
  const double a = u * (1 - u);
  return 140 * a * a * a;
}
double smooth7_int(double u) {
  if (u <= 0) return 0;
  if (u >= 1) return u - 0.5;
  const double u2 = u * u, u5 = u2 * u2 * u;
  return u5 * (7 - 14 * u + 10 * u2 - 2.5 * u2 * u);
}

// radial cap: h'(r) = -G(r/rb)
double capG(double u) {
  const double u2 = u * u;
  return u * (35 - 35 * u2 + 21 * u2 * u2 - 5 * u2 * u2 * u2) / 16;
}
double capG_over_u(double u) {
  const double u2 = u * u;
  return (35 - 35 * u2 + 21 * u2 * u2 - 5 * u2 * u2 * u2) / 16;
}
double capG_d(double u) {
  const double a = 1 - u * u;
  return 35 * a * a * a / 16;
}
double capG_int(double u) {
  const double u2 = u * u, u4 = u2 * u2;
  return (17.5 * u2 - 8.75 * u4 + 3.5 * u4 * u2 - 0.625 * u4 * u4) / 16;
}

Mat ident(int dim) {
  Mat I = Mat::Identity();
  if (dim == 1) I(1, 1) = 0;
  return I;
}

double trace_dim(const Mat& A, int dim) { return dim == 1 ? A(0, 0) : A.trace(); }

double spectral_norm(const Mat& A, int dim) {
  if (dim == 1) return std::fabs(A(0, 0));
  const double a = A(0, 0), b = 0.5 * (A(0, 1) + A(1, 0)), d = A(1, 1);
  const double m = 0.5 * (a + d), q = std::hypot(0.5 * (a - d), b);
  return std::max(std::fabs(m + q), std::fabs(m - q));
}

} // namespace

// ------------------------------------------------------------ interval

IntervalPsi1::IntervalPsi1(double length, double a0, double b0) : L_(length) {
  if (!(0 < a0 && a0 < b0 && b0 < length))
    throw ConstructionError("omega0 must satisfy 0 < a0 < b0 < L for the interval profile");
  const double p = 0.5 * (a0 + b0);
  if (p < 0.5 * length) {
    mirrored_ = true;
    const double na = length - b0, nb = length - a0;
    a0 = na;
    b0 = nb;
  }
  p_ = 0.5 * (a0 + b0);
  w1_ = 0.5 * (b0 - a0);
  const double ell = L_ - b0;
  w2_ = ell / 4;
  m_ = b0 + w2_;
  s_ = (p_ - (L_ - m_)) / (m_ - p_);
  collar_ = std::min({0.5 * L_, a0, L_ - m_ - w2_});
}

ScalarJet IntervalPsi1::eval_canonical(double x) const {
  ScalarJet j;
  const double u1 = (x - p_ + w1_) / (2 * w1_);
  const double u2 = (x - m_ + w2_) / (2 * w2_);
  if (u1 <= 0) {
    j.value = x;
    j.grad(0) = 1;
    return j;
  }
  if (u2 >= 1) {
    j.value = L_ - x;
    j.grad(0) = -1;
    return j;
  }
  j.value = x + (-s_ - 1) * 2 * w1_ * smooth7_int(u1) + (s_ - 1) * 2 * w2_ * smooth7_int(u2);
  j.grad(0) = 1 + (-s_ - 1) * smooth7(u1) + (s_ - 1) * smooth7(u2);
  j.hess(0, 0) = (-s_ - 1) * smooth7_d(u1) / (2 * w1_) + (s_ - 1) * smooth7_d(u2) / (2 * w2_);
  return j;
}

ScalarJet IntervalPsi1::eval(const Vec& x) const {
  if (!mirrored_) return eval_canonical(x(0));
  ScalarJet j = eval_canonical(L_ - x(0));
  j.grad(0) = -j.grad(0);
  return j;
}

double IntervalPsi1::euler_defect(const Vec& x) const {
  const ScalarJet j = eval(x);
  return x(0) * j.grad(0) - j.value;
}

std::vector<Vec> IntervalPsi1::critical_points() const {
  const double target = 1 / (1 + s_);
  double lo = 0, hi = 1;
  for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (smooth7(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  double xc = p_ - w1_ + 2 * w1_ * 0.5 * (lo + hi);
  if (mirrored_) xc = L_ - xc;
  return {Vec(xc, 0)};
}

// ------------------------------------------------------------ disk

DiskPsi1::DiskPsi1(double radius) : R_(radius), rb_(0.5 * radius) {
  if (!(radius > 0)) throw ConstructionError("disk radius must be positive");
}

ScalarJet DiskPsi1::eval(const Vec& x) const {
  ScalarJet j;
  const Vec d = x - Vec(0, R_);
  const double r = d.norm();
  if (r >= rb_) {
    const Vec e = d / r;
    j.value = (2 * R_ * x(1) - x.squaredNorm()) / (R_ + r);
    j.grad = -e;
    j.hess = -(Mat::Identity() - e * e.transpose()) / r;
    return j;
  }
  const double u = r / rb_;
  j.value = (R_ - rb_) + rb_ * (capG_int(1.0) - capG_int(u));
  const double hpr = -capG_over_u(u) / rb_;
  if (r == 0.0) {
    j.hess = hpr * Mat::Identity();
    return j;
  }
  const Vec e = d / r;
  j.grad = -capG(u) * e;
  const double hpp = -capG_d(u) / rb_;
  j.hess = hpp * e * e.transpose() + hpr * (Mat::Identity() - e * e.transpose());
  return j;
}

double DiskPsi1::euler_defect(const Vec& x) const {
  const Vec d = x - Vec(0, R_);
  const double r = d.norm();
  if (r >= rb_) {
    // equals -pr(x).n(pr(x)) = -R(1 + e2)
    const double e1 = d(0) / r, e2 = d(1) / r;
    const double one_plus_e2 = e2 < 0 ? e1 * e1 / (1 - e2) : 1 + e2;
    return -R_ * one_plus_e2;
  }
  const ScalarJet j = eval(x);
  return x.dot(j.grad) - j.value;
}

// ------------------------------------------------------------ recipes

namespace {
RecipeChoice pick(std::vector<Clause> clauses, bool take_max) {
  RecipeChoice c;
  c.clauses = std::move(clauses);
  c.value = take_max ? -kInf : kInf;
  for (const auto& cl : c.clauses) {
    if (take_max ? cl.value > c.value : cl.value < c.value) {
      c.value = cl.value;
      c.binding = cl.label;
    }
  }
  return c;
}
} // namespace

RecipeChoice choose_delta(const DeltaInputs& in) {
  if (!(in.delta0 > 0)) throw ConfigError("invalid kit: gradient floor delta0 must be positive");
  const double d0 = in.delta0, d02 = d0 * d0;
  const double c_prime = 2 * in.c_omega;
  return pick({{"one", 1.0},
               {"tangency", 2 * c_prime / d0},
               {"defect_radius", 24 * in.D * in.r_omega * in.r_omega / d02},
               {"gradient_floor", 2 / d0},
               {"mixed_sup", (1 + 4 * in.D + in.dpsi1 + 2 * in.d2psi1) / d02}},
              true);
}

RecipeChoice choose_r0(const R0Inputs& in) {
  if (!(in.gamma > 1 && in.gamma < 2)) throw ConfigError("invalid gamma: must lie in (1,2)");
  if (!(in.C3 > 0)) throw ConfigError("invalid constant: C3 must be positive");
  const double g = in.dpsi, h = in.d2psi, p = in.psi;
  const double ex = 1 / (in.gamma - 1);
  const double mu_clause = in.mu == 0.0 ? kInf : std::pow(in.C3 / (std::fabs(in.mu) * g), ex);
  return pick({{"one", 1.0},
               {"collar_half", in.beta0 / 2},
               {"gamma_gradient", 1 / ((2 - in.gamma) * (g + h))},
               {"gradient_hessian", 1 / std::sqrt(2 * (3 * g * g + h))},
               {"psi_gradient", 1 / (g * std::sqrt(8 * p * p + 2))},
               {"hardy_hessian", std::pow(in.C3 / (8 * g * g + 8 * h), ex)},
               {"hardy_mu", mu_clause},
               {"sqrt_gradient", 1 / std::sqrt(3 * g)},
               {"psi_times_gradient", 1 / (2 * p * g)},
               {"defect_hessian", 1 / std::sqrt(8 * in.D * g / in.delta0 + 3 * h)},
               {"gradient_sum", 2 / (4 * g + h)}},
              false);
}

// ------------------------------------------------------------ kit

PsiJet PsiKit::psi(const Vec& x) const {
  const ScalarJet j = psi1->eval(x);
  PsiJet out;
  out.value = delta * (j.value + 1);
  out.grad = delta * j.grad;
  out.hess = delta * j.hess;
  out.lap = trace_dim(out.hess, dim);
  out.x_dot_grad = x.dot(out.grad);
  out.scaled_euler_defect = delta * psi1->euler_defect(x);
  return out;
}

PsiKit make_kit(std::shared_ptr<const Psi1Field> psi1, int dim, double delta) {
  PsiKit k;
  k.psi1 = std::move(psi1);
  k.dim = dim;
  k.delta = delta;
  k.delta_overridden = true;
  k.collar = k.psi1->collar();
  return k;
}

DeltaInputs delta_inputs(const PsiKit& kit, const Geometry& g) {
  DeltaInputs in;
  in.delta0 = kit.delta0;
  in.c_omega = g.tangency_constant();
  in.D = kit.D;
  in.r_omega = g.r_omega();
  in.dpsi1 = kit.dpsi1_sup;
  in.d2psi1 = kit.d2psi1_sup;
  return in;
}

R0Inputs r0_inputs(const PsiKit& kit, double gamma, double mu, double C3) {
  R0Inputs in;
  in.dpsi = kit.dpsi_sup();
  in.d2psi = kit.d2psi_sup();
  in.psi = kit.psi_sup();
  in.gamma = gamma;
  in.mu = mu;
  in.C3 = C3;
  in.D = kit.D;
  in.delta0 = kit.delta0;
  in.beta0 = kit.collar;
  return in;
}

namespace {

std::vector<Vec> omega0_boundary_points(const Geometry& g, const Region& w0) {
  std::vector<Vec> out;
  if (w0.shape == Region::Shape::interval) {
    out.push_back(Vec(w0.lo, 0));
    out.push_back(Vec(w0.hi, 0));
  } else {
    for (int i = 0; i < 512; ++i) {
      const double t = 2 * M_PI * i / 512;
      out.push_back(w0.center + w0.radius * Vec(std::cos(t), std::sin(t)));
    }
  }
  std::vector<Vec> in;
  for (const Vec& p : out)
    if (g.contains(p)) in.push_back(p);
  return in;
}

std::vector<Vec> collar_level_points(const Geometry& g, double beta) {
  std::vector<Vec> out;
  if (g.kind() == GeometryKind::interval) {
    out.push_back(Vec(beta, 0));
    out.push_back(Vec(g.length() - beta, 0));
  } else if (g.kind() == GeometryKind::tangent_disk) {
    const double r = g.radius() - beta;
    for (int i = 0; i < 256; ++i) {
      const double t = 2 * M_PI * i / 256;
      out.push_back(g.center() + r * Vec(std::cos(t), std::sin(t)));
    }
  }
  return out;
}

} // namespace

PsiKit build_psi(const Geometry& g, const Regions& regions, const PsiBuildOptions& opt) {
  std::shared_ptr<const Psi1Field> psi1;
  switch (g.kind()) {
  case GeometryKind::interval:
    if (regions.omega0.shape != Region::Shape::interval) throw ConstructionError("omega0 must be an interval");
    psi1 = std::make_shared<IntervalPsi1>(g.length(), regions.omega0.lo, regions.omega0.hi);
    break;
  case GeometryKind::tangent_disk: psi1 = std::make_shared<DiskPsi1>(g.radius()); break;
  case GeometryKind::parabola_cap:
    throw ConstructionError("no psi1 construction is available for the parabola cap geometry");
  }
  for (const Vec& c : psi1->critical_points()) {
    if (!regions.omega0.contains(c))
      throw ConstructionError("critical point of psi1 at (" + fmt_point(c, g.dim()) + ") lies outside omega0");
  }

  PsiKit kit;
  kit.psi1 = psi1;
  kit.dim = g.dim();
  kit.collar = psi1->collar();

  std::vector<Vec> pts;
  Rng rng(opt.seed);
  for (std::size_t i = 0; i < opt.samples; ++i) pts.push_back(g.sample_interior(rng));
  for (const Vec& p : g.collar_samples(opt.samples / 5 + 1, opt.seed + 1)) pts.push_back(p);
  for (const Vec& p : g.boundary_samples(2000)) pts.push_back(p);
  for (const Vec& p : omega0_boundary_points(g, regions.omega0)) pts.push_back(p);
  for (const Vec& p : psi1->critical_points()) pts.push_back(p);
  if (g.dim() == 1) {
    for (int i = 0; i <= 4000; ++i) pts.push_back(Vec(g.length() * i / 4000.0, 0));
  }

  double sup0 = 0, sup1 = 0, sup2 = 0, dsup = 0;
  double floor = kInf;
  for (const Vec& x : pts) {
    const ScalarJet j = psi1->eval(x);
    sup0 = std::max(sup0, std::fabs(j.value));
    sup1 = std::max(sup1, j.grad.norm());
    sup2 = std::max(sup2, spectral_norm(j.hess, g.dim()));
    const double r2 = x.squaredNorm();
    if (r2 > 0) dsup = std::max(dsup, std::fabs(psi1->euler_defect(x)) / r2);
    if (!regions.omega0.contains(x)) floor = std::min(floor, j.grad.norm());

    const double rho = g.distance_to_boundary(x);
    const double tol = 1e-12 * (1 + rho);
    if (rho < kit.collar - tol) {
      if (std::fabs(j.value - rho) > 1e-10 * (1 + rho))
        throw ConstructionError("psi1 differs from the boundary distance at (" + fmt_point(x, g.dim()) + ")");
    } else if (rho > kit.collar + tol) {
      if (!(j.value > kit.collar))
        throw ConstructionError("psi1 does not exceed the collar width at (" + fmt_point(x, g.dim()) + ")");
    }
  }
  for (const Vec& x : collar_level_points(g, kit.collar)) {
    if (std::fabs(psi1->eval(x).value - kit.collar) > 1e-10)
      throw ConstructionError("psi1 is not constant on the collar level set at (" + fmt_point(x, g.dim()) + ")");
  }
  if (!(floor > 0)) throw ConstructionError("psi1 has a vanishing gradient outside omega0");

  kit.delta0 = floor;
  kit.psi1_sup = sup0;
  kit.dpsi1_sup = sup1;
  kit.d2psi1_sup = sup2;
  kit.D = 1.1 * dsup;
  kit.delta_choice = choose_delta(delta_inputs(kit, g));
  if (opt.delta_override > 0) {
    kit.delta = opt.delta_override;
    kit.delta_overridden = true;
  } else {
    kit.delta = kit.delta_choice.value;
  }
  return kit;
}

// ------------------------------------------------------------ C_lambda

namespace {
XReal tau_value(double lambda, const PsiKit& kit, double r0, const Vec& x) {
  const double psi = kit.psi(x).value;
  const double r2 = x.squaredNorm();
  XReal t(r2 * psi);
  if (r2 > 0) t += XReal::exp(lambda * (psi - std::log(r0) + 0.5 * std::log(r2)));
  return t;
}

bool clamp_into(const Geometry& g, Vec& x) {
  switch (g.kind()) {
  case GeometryKind::interval: x(0) = std::clamp(x(0), 0.0, g.length()); return true;
  case GeometryKind::tangent_disk: {
    const Vec d = x - g.center();
    const double r = d.norm();
    if (r > g.radius()) x = g.center() + d * (g.radius() / r);
    return true;
  }
  case GeometryKind::parabola_cap: return g.contains(x);
  }
  return false;
}
} // namespace

XReal choose_C_lambda(double lambda, const PsiKit& kit, const Geometry& g, double r0, std::uint64_t seed) {
  if (!(r0 > 0)) throw ConfigError("r0 must be positive");
  std::vector<Vec> pts;
  Rng rng(seed);
  for (int i = 0; i < 4000; ++i) pts.push_back(g.sample_interior(rng));
  for (const Vec& p : g.boundary_samples(2000)) pts.push_back(p);
  for (const Vec& p : kit.psi1->critical_points()) pts.push_back(p);

  auto objective = [&](const Vec& x) {
    const double r2 = x.squaredNorm();
    return r2 > 0 ? 0.5 * std::log(r2) + kit.psi(x).value : -kInf;
  };

  XReal best(0.0);
  std::vector<std::pair<double, Vec>> ranked;
  for (const Vec& x : pts) {
    best = max(best, tau_value(lambda, kit, r0, x));
    ranked.emplace_back(objective(x), x);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const std::size_t nref = std::min<std::size_t>(8, ranked.size());
  for (std::size_t i = 0; i < nref; ++i) {
    Vec x = ranked[i].second;
    double f = ranked[i].first;
    double step = 0.1 * g.r_omega();
    for (int it = 0; it < 200 && step > 1e-14 * g.r_omega(); ++it) {
      const double r2 = x.squaredNorm();
      Vec grad = x / r2 + kit.psi(x).grad;
      if (g.dim() == 1) grad(1) = 0;
      const double gn = grad.norm();
      if (gn == 0.0) break;
      Vec y = x + step * grad / gn;
      if (!clamp_into(g, y) || y.squaredNorm() == 0.0) {
        step *= 0.5;
        continue;
      }
      const double fy = objective(y);
      if (fy > f) {
        x = y;
        f = fy;
        best = max(best, tau_value(lambda, kit, r0, x));
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
  }
  return XReal(1.05) * best + XReal(1.0);
}

// ------------------------------------------------------------ tau / sigma

ScaledVec TauJet::grad() const {
  ScaledVec g;
  g.scale = max(XReal(1.0), P);
  const double inv = (XReal(1.0) / g.scale).to_double();
  const double pr = XReal::ratio(P, g.scale);
  g.v = inv * x2_grad + pr * n_grad;
  return g;
}

CarlemanWeight::CarlemanWeight(const PsiKit& kit, WeightParams p) : kit_(kit), p_(std::move(p)) {
  if (!(p_.gamma > 0 && p_.gamma < 2)) throw ConfigError("gamma must lie in (0,2)");
  if (!(p_.r0 > 0)) throw ConfigError("r0 must be positive");
  if (!(p_.T > 0)) throw ConfigError("horizon T must be positive");
}

void CarlemanWeight::check_window(double t) const {
  if (!(t > 0 && t < p_.T)) throw DomainError("time " + fmt(t) + " outside the open window (0,T)");
}

double CarlemanWeight::theta(double t) const {
  check_window(t);
  return std::pow(t * (p_.T - t), -k());
}

double CarlemanWeight::theta_dt(double t) const {
  check_window(t);
  const double q = t * (p_.T - t), kk = k();
  return -kk * std::pow(q, -kk - 1) * (p_.T - 2 * t);
}

double CarlemanWeight::theta_dtt(double t) const {
  check_window(t);
  const double q = t * (p_.T - t), kk = k(), dq = p_.T - 2 * t;
  return kk * (kk + 1) * std::pow(q, -kk - 2) * dq * dq + 2 * kk * std::pow(q, -kk - 1);
}

double CarlemanWeight::alpha(const Vec& x) const {
  const double r = x.norm(), r0 = p_.r0;
  const double n = kit_.dim;
  if (r <= 0.5 * r0) return 0;
  if (r >= r0) return 1 / n;
  const double u = (r - 0.5 * r0) / (0.5 * r0);
  return u * u * u * (10 - 15 * u + 6 * u * u) / n;
}

TauJet CarlemanWeight::tau(const Vec& x) const {
  TauJet j;
  const int dim = kit_.dim;
  const double lam = p_.lambda;
  const Mat I = ident(dim);
  j.x = x;
  j.dim = dim;
  j.lambda = lam;
  j.psi = kit_.psi(x);
  const double r2 = x.squaredNorm();
  j.r2 = r2;
  const double psi = j.psi.value;
  const Vec& g = j.psi.grad;
  const Mat& H = j.psi.hess;

  j.x2_value = r2 * psi;
  j.x2_grad = 2 * psi * x + r2 * g;
  j.x2_hess = 2 * psi * I + 2 * (x * g.transpose() + g * x.transpose()) + r2 * H;
  j.x2_lap = trace_dim(j.x2_hess, dim);

  if (r2 == 0.0) {
    if (lam < 2) throw DomainError("tau_phi derivatives are unbounded at the origin for lambda < 2");
    if (lam > 2) {
      j.P = XReal(0.0);
      return j;
    }
    j.P = XReal::exp(lam * (psi - std::log(p_.r0)));
    j.n_hess = 2 * I;
    j.n_lap = 2.0 * dim;
    return j;
  }
  j.P = XReal::exp(lam * (psi - std::log(p_.r0)) + (lam - 2) * 0.5 * std::log(r2));
  j.n_value = r2;
  j.n_grad = lam * (x + r2 * g);
  j.n_hess = lam * I + lam * (lam - 2) * (x * x.transpose()) / r2 +
             lam * lam * (g * x.transpose() + x * g.transpose()) + lam * r2 * H + lam * lam * r2 * (g * g.transpose());
  j.n_lap = trace_dim(j.n_hess, dim);
  return j;
}

SigmaJet CarlemanWeight::sigma(double t, const Vec& x, bool times_s) const {
  check_window(t);
  const double q = t * (p_.T - t), kk = k(), dq = p_.T - 2 * t;
  const double lq = std::log(q);
  const XReal th = XReal::exp(-kk * lq);
  const XReal th1 = XReal(-kk * dq) * XReal::exp((-kk - 1) * lq);
  const XReal th2 = XReal(kk * (kk + 1) * dq * dq) * XReal::exp((-kk - 2) * lq) + XReal(2 * kk) * XReal::exp((-kk - 1) * lq);

  const TauJet tj = tau(x);
  const XReal rest = p_.C_lambda - tj.value();
  SigmaJet s;
  s.value = th * rest;
  s.dt = th1 * rest;
  s.dtt = th2 * rest;

  const XReal S = max(XReal(1.0), tj.P);
  const double inv = (XReal(1.0) / S).to_double();
  const double pr = XReal::ratio(tj.P, S);
  s.scale = th * S;
  s.grad_n = -(inv * tj.x2_grad + pr * tj.n_grad);
  s.hess_n = -(inv * tj.x2_hess + pr * tj.n_hess);
  s.lap_n = -(inv * tj.x2_lap + pr * tj.n_lap);
  if (times_s) {
    const XReal sv(p_.s);
    s.value *= sv;
    s.dt *= sv;
    s.dtt *= sv;
    s.scale *= sv;
  }
  return s;
}

} // namespace singheat
