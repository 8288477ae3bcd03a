#include "singheat/hardy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace singheat {

std::string to_string(Placement p) { return p == Placement::boundary ? "boundary" : "interior"; }

std::string to_string(InequalityId id) {
  switch (id) {
  case InequalityId::hardy_c1: return "hardy_c1";
  case InequalityId::two_constant: return "two_constant";
  default: return "norm_equivalence";
  }
}

VecX weighted_mass(const Grid& g, double s) {
  const VecX d2 = g.dist2();
  VecX w(d2.size());
  for (Eigen::Index i = 0; i < d2.size(); ++i) w(i) = g.mass[static_cast<std::size_t>(i)] * std::pow(d2(i), -0.5 * s);
  return w;
}

SpMat weighted_stiffness(const Grid& g, double s) {
  std::vector<Eigen::Triplet<double>> tr;
  for (const auto& e : g.elements) {
    const int nv = e[2] < 0 ? 2 : 3;
    Vec c = Vec::Zero();
    for (int a = 0; a < nv; ++a) c += g.all_nodes[static_cast<std::size_t>(e[a])];
    c /= nv;
    const double w = std::pow((c - g.singular_point).norm(), s);
    double Ke[3][3] = {};
    if (nv == 2) {
      const double len = (g.all_nodes[static_cast<std::size_t>(e[1])] - g.all_nodes[static_cast<std::size_t>(e[0])]).norm();
      Ke[0][0] = Ke[1][1] = 1 / len;
      Ke[0][1] = Ke[1][0] = -1 / len;
    } else {
      const Vec& p0 = g.all_nodes[static_cast<std::size_t>(e[0])];
      Mat B;
      B.col(0) = g.all_nodes[static_cast<std::size_t>(e[1])] - p0;
      B.col(1) = g.all_nodes[static_cast<std::size_t>(e[2])] - p0;
      const double area = 0.5 * std::fabs(B.determinant());
      Eigen::Matrix<double, 2, 3> dphi;
      dphi << -1, 1, 0, -1, 0, 1;
      const Eigen::Matrix<double, 2, 3> G = B.inverse().transpose() * dphi;
      const Eigen::Matrix3d K = area * G.transpose() * G;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) Ke[a][b] = K(a, b);
    }
    for (int a = 0; a < nv; ++a) {
      const int ia = g.unknown_of[static_cast<std::size_t>(e[a])];
      if (ia < 0) continue;
      for (int b = 0; b < nv; ++b) {
        const int ib = g.unknown_of[static_cast<std::size_t>(e[b])];
        if (ib >= 0) tr.emplace_back(ia, ib, w * Ke[a][b]);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(g.size());
  SpMat K(n, n);
  K.setFromTriplets(tr.begin(), tr.end());
  K = 0.5 * (K + SpMat(K.transpose()));
  return K;
}

namespace {

SpMat diag(const VecX& d) {
  SpMat D(d.size(), d.size());
  std::vector<Eigen::Triplet<double>> tr;
  for (Eigen::Index i = 0; i < d.size(); ++i) tr.emplace_back(i, i, d(i));
  D.setFromTriplets(tr.begin(), tr.end());
  return D;
}

VecX mass_vec(const Grid& g) {
  VecX m(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) m(static_cast<Eigen::Index>(i)) = g.mass[i];
  return m;
}

} // namespace

EigenPair hardy_eigenpair(const Grid& g, double s, double sub, double C) {
  const VecX m = mass_vec(g);
  SpMat A = g.K + diag(C * m - sub * weighted_mass(g, 2));
  return smallest_eigenpair(A, weighted_mass(g, s));
}

double best_hardy_constant(const Grid& g, double C, EigenPair* out) {
  EigenPair ep = hardy_eigenpair(g, 2, 0, C);
  if (out) *out = ep;
  return ep.value;
}

HardyReport hardy_study(const std::vector<Grid>& grids, Placement placement, double C, int workers) {
  if (grids.empty()) throw ConfigError("hardy study needs at least one grid");
  HardyReport rep;
  rep.N = grids.front().dim;
  rep.placement = placement;
  rep.levels.resize(grids.size());
  std::vector<char> positive(grids.size(), 0);
  parallel_for(grids.size(), workers, [&](std::size_t i) {
    EigenPair ep;
    const double mu = best_hardy_constant(grids[i], C, &ep);
    rep.levels[i] = {grids[i].h, grids[i].size(), mu, ep.residual};
    positive[i] = ep.vec.minCoeff() >= -1e-10 * ep.vec.cwiseAbs().maxCoeff();
  });
  const double critical = placement == Placement::boundary ? rep.N * rep.N / 4.0 : (rep.N - 2.0) * (rep.N - 2.0) / 4.0;
  rep.monotone = rep.residuals_ok = rep.dominates = rep.positive_ground_state = true;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    if (i > 0 && rep.levels[i].constant > rep.levels[i - 1].constant + 1e-3) rep.monotone = false;
    if (!(rep.levels[i].residual <= 1e-8)) rep.residuals_ok = false;
    if (rep.levels[i].constant < critical - 1e-6) rep.dominates = false;
    if (!positive[i]) rep.positive_ground_state = false;
  }
  const std::size_t n = rep.levels.size();
  if (n < 2) {
    rep.fit_intercept = rep.levels.back().constant;
  } else {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& l : rep.levels) {
      const double lg = std::log(1 / l.h);
      const double x = 1 / (lg * lg);
      sx += x;
      sy += l.constant;
      sxx += x * x;
      sxy += x * l.constant;
    }
    const double dn = static_cast<double>(n);
    const double det = dn * sxx - sx * sx;
    rep.fit_slope = det != 0.0 ? (dn * sxy - sx * sy) / det : 0.0;
    rep.fit_intercept = (sy - rep.fit_slope * sx) / dn;
  }
  return rep;
}

C0Result estimate_C0_gamma(const Grid& g, double gamma, double sub, const C0Options& opt) {
  if (!(gamma >= 0 && gamma < 2)) throw ConfigError("gamma must lie in [0,2)");
  auto nu = [&](double C) { return hardy_eigenpair(g, gamma, sub, C).value; };
  C0Result r;
  const double n0 = nu(0);
  if (n0 >= 1) {
    r.value = 0;
    r.nu = n0;
    return r;
  }
  const double ncap = nu(opt.cap);
  if (ncap < 1) throw CapExceeded("shift predicate fails at the cap C = " + fmt(opt.cap) + " (quotient " + fmt(ncap) + ")");
  double lo = 0, hi = opt.cap, nhi = ncap;
  for (int it = 0; it < opt.iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = nu(mid);
    if (v >= 1) {
      hi = mid;
      nhi = v;
    } else {
      lo = mid;
    }
    r.iterations = it + 1;
  }
  r.value = hi;
  r.nu = nhi;
  return r;
}

HardyForms::HardyForms(const Grid& g, double gamma)
    : g_(&g), Kw_(weighted_stiffness(g, 2 - gamma)), w2_(weighted_mass(g, 2)), wg_(weighted_mass(g, gamma)) {}

QuadForms HardyForms::eval(const VecX& u) const {
  QuadForms q;
  q.grad = u.dot(g_->K * u);
  q.grad_w = u.dot(Kw_ * u);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double u2 = u(i) * u(i);
    q.l2 += g_->mass[static_cast<std::size_t>(i)] * u2;
    q.w2 += w2_(i) * u2;
    q.wg += wg_(i) * u2;
  }
  return q;
}

void inequality_sides(InequalityId id, const InequalityConstants& c, const QuadForms& q, double& lhs, double& rhs) {
  switch (id) {
  case InequalityId::hardy_c1:
    lhs = q.wg + c.mu * q.w2;
    rhs = q.grad + c.C1 * q.l2;
    return;
  case InequalityId::two_constant:
    lhs = c.C3 * (q.grad_w + q.wg);
    rhs = c.C2 * q.l2 + q.grad - c.mu * q.w2;
    return;
  case InequalityId::norm_equivalence: {
    const double mup = std::max(0.0, c.mu), mum = std::max(0.0, -c.mu);
    const double base = q.grad + c.C0 * q.l2;
    const double B = q.grad - c.mu * q.w2 + c.C0 * q.l2;
    const double low = (1 - mup / c.mu_N) * base + (mup / c.mu_N) * q.wg;
    const double up = (1 + mum / c.mu_N) * base;
    // report the tighter of low <= B and B <= up
    if (B - low <= up - B) {
      lhs = low;
      rhs = B;
    } else {
      lhs = B;
      rhs = up;
    }
    return;
  }
  }
}

VecX random_field(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  VecX u(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
  return u;
}

InequalityReport check_inequality(const HardyForms& forms, InequalityId id, const InequalityConstants& c, int fields,
                                  std::uint64_t seed) {
  InequalityReport rep;
  rep.id = id;
  rep.fields = fields;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < fields; ++i) {
    const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(i);
    const VecX u = random_field(forms.grid().size(), s);
    double lhs = 0, rhs = 0;
    inequality_sides(id, c, forms.eval(u), lhs, rhs);
    const double scale = std::max({std::fabs(lhs), std::fabs(rhs), std::numeric_limits<double>::min()});
    const double margin = (rhs - lhs) / scale;
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_seed = s;
    }
    if (margin < -1e-12) ++rep.violations;
  }
  return rep;
}

TwoConstantFit fit_two_constants(const Grid& g, double gamma, double mu, double C2_cap, int kmax) {
  const SpMat base = g.K + diag(-mu * weighted_mass(g, 2));
  const SpMat extra = weighted_stiffness(g, 2 - gamma) + diag(weighted_mass(g, gamma));
  const VecX m = mass_vec(g);
  TwoConstantFit fit;
  for (int k = 0; k <= kmax; ++k) {
    const double C3 = std::ldexp(1.0, -k);
    const double nu = smallest_eigenpair(SpMat(base - C3 * extra), m).value;
    const double req = -nu;
    fit.rows.push_back({C3, req});
    if (req <= C2_cap) {
      fit.C3 = C3;
      fit.C2 = req + 1e-6 * std::max(1.0, std::fabs(req));
      return fit;
    }
  }
  throw CapExceeded("no C3 on the sweep keeps C2 below " + fmt(C2_cap));
}

double phi_value(const Geometry& geo, const Vec& x, bool suppress_rho) {
  const int N = geo.dim();
  const double r = geo.dim() == 1 ? std::fabs(x(0)) : x.norm();
  const double rho = suppress_rho ? 1.0 : geo.distance_to_boundary(x);
  return rho * std::exp((1 - N) * rho) * std::sqrt(std::fabs(std::log(1 / r))) * std::pow(r, -0.5 * N);
}

namespace {

// returns -Lap phi - N^2/4 phi/|x|^2 and phi
double phi_margin(const Geometry& geo, const Vec& x, double r, double h, bool suppress, double& f) {
  const int N = geo.dim();
  f = phi_value(geo, x, suppress);
  auto lap_at = [&](double hh) {
    double lap = 0;
    for (int k = 0; k < N; ++k) {
      Vec e = Vec::Zero();
      e(k) = hh;
      lap += (phi_value(geo, x + e, suppress) + phi_value(geo, x - e, suppress) - 2 * f) / (hh * hh);
    }
    return lap;
  };
  // one Richardson step on the central difference
  const double lap = (4 * lap_at(h / 2) - lap_at(h)) / 3;
  return -lap - N * N / 4.0 * f / (r * r);
}

} // namespace

PhiCheck appendix_phi_check(const Geometry& geo, const PhiOptions& opt) {
  if (opt.samples < 2) throw ConfigError("supersolution check needs at least two samples");
  PhiCheck out;
  out.N = geo.dim();
  out.suppress_rho = opt.suppress_rho;
  out.r1 = opt.r1 > 0 ? opt.r1 : 0.05 * geo.r_omega();
  if (!(out.r1 < 1)) throw ConfigError("supersolution check needs r1 < 1 so that log(1/|x|) > 0");
  out.min_margin = std::numeric_limits<double>::infinity();
  out.fitted_constant = std::numeric_limits<double>::infinity();
  const double angles[3] = {0.0, M_PI / 4, -M_PI / 4};
  for (int i = 0; i < opt.samples; ++i) {
    PhiSample s;
    s.r = out.r1 * std::exp2(-opt.decades * i / (opt.samples - 1));
    if (out.N == 1) {
      s.x = Vec(s.r, 0);
    } else {
      const double a = angles[i % 3];
      s.x = s.r * Vec(std::sin(a), std::cos(a));
    }
    s.h_fd = s.r / 100;
    double f = 0;
    s.margin = phi_margin(geo, s.x, s.r, s.h_fd, opt.suppress_rho, f);
    if (s.margin < 0) {
      s.retried = true;
      s.h_fd /= 10;
      s.margin = phi_margin(geo, s.x, s.r, s.h_fd, opt.suppress_rho, f);
    }
    const double lg = std::log(1 / s.r);
    s.remainder = s.margin / f * s.r * s.r * lg * lg;
    if (s.margin < 0) ++out.failures;
    out.min_margin = std::min(out.min_margin, s.margin);
    out.fitted_constant = std::min(out.fitted_constant, s.remainder);
    out.samples.push_back(s);
  }
  return out;
}

void append_rows(std::vector<HardyRow>& rows, const std::string& name, const HardyReport& rep) {
  for (const auto& l : rep.levels) rows.push_back({name, rep.N, rep.gamma, l.h, l.constant, l.residual});
}

void write_hardy_csv(std::ostream& os, const std::vector<HardyRow>& rows) {
  os << "case,N,gamma,h,constant,residual\n";
  for (const auto& r : rows)
    os << r.name << ',' << r.N << ',' << fmt(r.gamma) << ',' << fmt(r.h) << ',' << fmt(r.constant) << ','
       << fmt(r.residual) << '\n';
}

} // namespace singheat
