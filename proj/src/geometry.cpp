#include "singheat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace singheat {

namespace {
constexpr double kPad = 1.1;
constexpr double kBoundaryTol = 1e-9;
} // namespace

std::string to_string(GeometryKind k) {
  switch (k) {
  case GeometryKind::interval: return "interval";
  case GeometryKind::tangent_disk: return "tangent_disk";
  case GeometryKind::parabola_cap: return "parabola_cap";
  }
  return "unknown";
}

Geometry Geometry::interval(double length) {
  if (!(length > 0)) throw ConfigError("interval length must be positive");
  Geometry g;
  g.kind_ = GeometryKind::interval;
  g.dim_ = 1;
  g.L_ = length;
  g.r_omega_ = length;
  g.beta0_ = length / 2;
  g.finish();
  return g;
}

Geometry Geometry::tangent_disk(double radius) {
  if (!(radius > 0)) throw ConfigError("disk radius must be positive");
  Geometry g;
  g.kind_ = GeometryKind::tangent_disk;
  g.dim_ = 2;
  g.R_ = radius;
  g.r_omega_ = 2 * radius;
  g.beta0_ = radius / 2;
  g.finish();
  return g;
}

Geometry Geometry::parabola_cap(double curvature, double cap_radius) {
  if (!(cap_radius > 0)) throw ConfigError("cap radius must be positive");
  Geometry g;
  g.kind_ = GeometryKind::parabola_cap;
  g.dim_ = 2;
  g.beta_ = curvature;
  g.rcap_ = cap_radius;
  g.r_omega_ = cap_radius;
  g.beta0_ = g.parabola_reach();
  g.finish();
  return g;
}

double Geometry::parabola_half_width() const {
  // a^2 + beta^2 a^4 = rcap^2
  if (beta_ == 0.0) return rcap_;
  const double b2 = beta_ * beta_;
  const double a2 = 2 * rcap_ * rcap_ / (1 + std::sqrt(1 + 4 * b2 * rcap_ * rcap_));
  return std::sqrt(a2);
}

Vec Geometry::box_lo() const {
  switch (kind_) {
  case GeometryKind::interval: return Vec(0, 0);
  case GeometryKind::tangent_disk: return Vec(-R_, 0);
  case GeometryKind::parabola_cap: {
    const double a = parabola_half_width();
    return Vec(-rcap_, std::min(0.0, beta_ * a * a));
  }
  }
  return Vec::Zero();
}

Vec Geometry::box_hi() const {
  switch (kind_) {
  case GeometryKind::interval: return Vec(L_, 0);
  case GeometryKind::tangent_disk: return Vec(R_, 2 * R_);
  case GeometryKind::parabola_cap: return Vec(rcap_, rcap_);
  }
  return Vec::Zero();
}

bool Geometry::contains(const Vec& x, double tol) const {
  switch (kind_) {
  case GeometryKind::interval: return x(0) >= -tol && x(0) <= L_ + tol;
  case GeometryKind::tangent_disk: {
    // 2R x2 - |x|^2 = R^2 - |x-c|^2
    return 2 * R_ * x(1) - x.squaredNorm() >= -tol * R_;
  }
  case GeometryKind::parabola_cap:
    return x(1) - beta_ * x(0) * x(0) >= -tol && x.norm() <= rcap_ + tol;
  }
  return false;
}

bool Geometry::on_boundary(const Vec& x, double tol) const {
  if (!contains(x, tol)) return false;
  double d = 0;
  nearest_boundary_point(x, &d);
  const double scale = kind_ == GeometryKind::interval ? L_ : (kind_ == GeometryKind::tangent_disk ? R_ : rcap_);
  return d <= tol * scale;
}

Vec Geometry::nearest_boundary_point(const Vec& x, double* dist) const {
  switch (kind_) {
  case GeometryKind::interval: {
    if (x(0) <= L_ - x(0)) {
      *dist = x(0);
      return Vec(0, 0);
    }
    *dist = L_ - x(0);
    return Vec(L_, 0);
  }
  case GeometryKind::tangent_disk: {
    const Vec d = x - center();
    const double r = d.norm();
    *dist = (2 * R_ * x(1) - x.squaredNorm()) / (R_ + r);
    if (r == 0.0) return Vec(0, 0);
    const double e1 = d(0) / r, e2 = d(1) / r;
    const double one_plus_e2 = e2 < 0 ? e1 * e1 / (1 - e2) : 1 + e2;
    return Vec(R_ * e1, R_ * one_plus_e2);
  }
  case GeometryKind::parabola_cap: {
    const double am = parabola_half_width();
    const double b = beta_, px = x(0), py = x(1);
    auto q = [&](double a) { return 2 * b * b * a * a * a + (1 - 2 * b * py) * a - px; };
    auto dq = [&](double a) { return 6 * b * b * a * a + (1 - 2 * b * py); };
    auto dist_to = [&](double a) { return std::hypot(px - a, py - b * a * a); };
    double best = std::numeric_limits<double>::infinity();
    Vec bp(0, 0);
    auto consider = [&](double a) {
      const double d = dist_to(a);
      if (d < best) {
        best = d;
        bp = Vec(a, b * a * a);
      }
    };
    consider(-am);
    consider(am);
    const int M = 256;
    double a0 = -am, q0 = q(a0);
    for (int i = 1; i <= M; ++i) {
      const double a1 = -am + 2 * am * i / M;
      const double q1 = q(a1);
      if (q0 == 0.0) consider(a0);
      if ((q0 < 0) != (q1 < 0) && q1 != 0.0) {
        double lo = a0, hi = a1, flo = q0;
        double a = 0.5 * (lo + hi);
        // initial guess favouring the root-scale of px near the vertex
        const double lin = px / (1 - 2 * b * py);
        if (std::isfinite(lin) && lin > lo && lin < hi) a = lin;
        for (int it = 0; it < 200; ++it) {
          const double fa = q(a);
          if (fa == 0.0) break;
          if ((fa < 0) == (flo < 0)) {
            lo = a;
            flo = fa;
          } else {
            hi = a;
          }
          const double der = dq(a);
          double na = der != 0.0 ? a - fa / der : 0.5 * (lo + hi);
          if (!(na > lo && na < hi)) na = 0.5 * (lo + hi);
          if (std::fabs(na - a) <= 1e-17 * std::fabs(a) + 1e-300) {
            a = na;
            break;
          }
          a = na;
        }
        consider(a);
      }
      a0 = a1;
      q0 = q1;
    }
    const double r = x.norm();
    if (r > 0) {
      const Vec p = x * (rcap_ / r);
      if (p(1) - b * p(0) * p(0) >= 0 && rcap_ - r < best) {
        best = rcap_ - r;
        bp = p;
      }
    }
    *dist = best;
    return bp;
  }
  }
  *dist = 0;
  return Vec::Zero();
}

double Geometry::distance_to_boundary(const Vec& x) const {
  if (!contains(x, 1e-12)) throw DomainError("point outside the closed domain: " + fmt_point(x, dim_));
  double d = 0;
  nearest_boundary_point(x, &d);
  return std::max(0.0, d);
}

Vec Geometry::project_to_boundary(const Vec& x) const {
  const double d = distance_to_boundary(x);
  if (d >= beta0_)
    throw DomainError("projection not unique: distance " + fmt(d) + " >= collar width " + fmt(beta0_));
  double dd = 0;
  return nearest_boundary_point(x, &dd);
}

Vec Geometry::outward_normal(const Vec& p) const {
  switch (kind_) {
  case GeometryKind::interval:
    if (std::fabs(p(0)) <= kBoundaryTol * L_) return Vec(-1, 0);
    if (std::fabs(p(0) - L_) <= kBoundaryTol * L_) return Vec(1, 0);
    break;
  case GeometryKind::tangent_disk: {
    const Vec d = p - center();
    if (std::fabs(d.norm() - R_) <= kBoundaryTol * R_) return d / d.norm();
    break;
  }
  case GeometryKind::parabola_cap: {
    const double r = p.norm();
    const double gap = p(1) - beta_ * p(0) * p(0);
    if (std::fabs(gap) <= kBoundaryTol * rcap_ && r <= rcap_ * (1 + kBoundaryTol)) {
      const double a = p(0);
      return Vec(2 * beta_ * a, -1) / std::sqrt(1 + 4 * beta_ * beta_ * a * a);
    }
    if (std::fabs(r - rcap_) <= kBoundaryTol * rcap_ && gap >= -kBoundaryTol * rcap_) return p / r;
    break;
  }
  }
  throw DomainError("point not on the boundary: " + fmt_point(p, dim_));
}

double Geometry::projection_normal_dot(const Vec& x) const {
  switch (kind_) {
  case GeometryKind::interval: return x(0) <= L_ / 2 ? 0.0 : L_;
  case GeometryKind::tangent_disk: {
    const Vec d = x - center();
    const double r = d.norm();
    if (r == 0.0) return R_;
    const double e1 = d(0) / r, e2 = d(1) / r;
    const double one_plus_e2 = e2 < 0 ? e1 * e1 / (1 - e2) : 1 + e2;
    return R_ * one_plus_e2;
  }
  case GeometryKind::parabola_cap: {
    double dist = 0;
    const Vec p = nearest_boundary_point(x, &dist);
    if (std::fabs(p.norm() - rcap_) <= kBoundaryTol * rcap_ && p(1) - beta_ * p(0) * p(0) > kBoundaryTol * rcap_)
      return rcap_;
    const double a = p(0);
    return beta_ * a * a / std::sqrt(1 + 4 * beta_ * beta_ * a * a);
  }
  }
  return 0.0;
}

Vec Geometry::sample_interior(Rng& rng) const {
  switch (kind_) {
  case GeometryKind::interval: return Vec(rng.uniform(0, L_), 0);
  case GeometryKind::tangent_disk: {
    const double r = R_ * std::sqrt(rng.uniform());
    const double t = 2 * M_PI * rng.uniform();
    Vec x = center() + r * Vec(std::cos(t), std::sin(t));
    if (!contains(x)) x(1) = std::max(x(1), x.squaredNorm() / (2 * R_));
    return x;
  }
  case GeometryKind::parabola_cap: {
    const Vec lo = box_lo(), hi = box_hi();
    for (;;) {
      Vec x(rng.uniform(lo(0), hi(0)), rng.uniform(lo(1), hi(1)));
      if (contains(x)) return x;
    }
  }
  }
  return Vec::Zero();
}

std::vector<Vec> Geometry::boundary_samples(std::size_t n) const {
  std::vector<Vec> out;
  switch (kind_) {
  case GeometryKind::interval:
    out.push_back(Vec(0, 0));
    out.push_back(Vec(L_, 0));
    break;
  case GeometryKind::tangent_disk: {
    // x = (R sin f, 2R sin^2(f/2)) is exactly on the circle, f = 0 at the origin
    auto at = [&](double f) {
      const double s = std::sin(f / 2);
      return Vec(R_ * std::sin(f), 2 * R_ * s * s);
    };
    for (std::size_t i = 0; i < n; ++i) out.push_back(at(2 * M_PI * static_cast<double>(i) / static_cast<double>(n)));
    for (int j = 1; j <= 40; ++j) {
      const double f = std::ldexp(0.5, -j);
      out.push_back(at(f));
      out.push_back(at(-f));
    }
    break;
  }
  case GeometryKind::parabola_cap: {
    const double am = parabola_half_width();
    const std::size_t np = std::max<std::size_t>(2, n / 2);
    for (std::size_t i = 0; i < np; ++i) {
      const double a = -am + 2 * am * static_cast<double>(i) / static_cast<double>(np - 1);
      out.push_back(Vec(a, beta_ * a * a));
    }
    for (int j = 1; j <= 40; ++j) {
      const double a = am * std::ldexp(1.0, -j);
      out.push_back(Vec(a, beta_ * a * a));
      out.push_back(Vec(-a, beta_ * a * a));
    }
    const double t0 = std::atan2(beta_ * am * am, am);
    const double t1 = M_PI - t0;
    const std::size_t na = std::max<std::size_t>(2, n - np);
    for (std::size_t i = 1; i + 1 < na; ++i) {
      const double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(na - 1);
      out.push_back(rcap_ * Vec(std::cos(t), std::sin(t)));
    }
    break;
  }
  }
  return out;
}

std::vector<Vec> Geometry::collar_samples(std::size_t n, std::uint64_t seed) const {
  std::vector<Vec> out;
  Rng rng(seed);
  std::size_t tries = 0;
  while (out.size() < n && tries < 50 * n) {
    ++tries;
    const Vec x = sample_interior(rng);
    double d = 0;
    nearest_boundary_point(x, &d);
    if (d < beta0_ && x.norm() > 0) out.push_back(x);
  }
  const int dirs = dim_ == 1 ? 1 : 7;
  for (int j = 0; j <= 40; ++j) {
    const double r = beta0_ * std::ldexp(0.9, -j);
    for (int k = 0; k < dirs; ++k) {
      Vec x;
      if (dim_ == 1) {
        x = Vec(r, 0);
        out.push_back(Vec(L_ - r, 0));
      } else {
        const double t = M_PI * (k + 0.5) / dirs;
        x = r * Vec(std::cos(t), std::sin(t));
      }
      if (contains(x)) {
        double d = 0;
        nearest_boundary_point(x, &d);
        if (d < beta0_) out.push_back(x);
      }
    }
  }
  return out;
}

double Geometry::parabola_reach() const {
  // distance along the inward normal over which the projection stays put,
  // minimised over the parabola part within half the cap radius
  const double b = beta_;
  const double half = 0.5 * rcap_;
  const double ah = (b == 0.0) ? half : std::sqrt(2 * half * half / (1 + std::sqrt(1 + 4 * b * b * half * half)));
  double reach = std::numeric_limits<double>::infinity();
  const int M = 41;
  for (int i = 0; i < M; ++i) {
    const double a = -ah + 2 * ah * i / (M - 1);
    const Vec p(a, b * a * a);
    const Vec inward = -Vec(2 * b * a, -1) / std::sqrt(1 + 4 * b * b * a * a);
    double lo = 0, hi = rcap_;
    for (int it = 0; it < 60; ++it) {
      const double t = 0.5 * (lo + hi);
      const Vec x = p + t * inward;
      bool ok = contains(x);
      if (ok) {
        double d = 0;
        const Vec q = nearest_boundary_point(x, &d);
        ok = (q - p).norm() <= 1e-7 * rcap_;
      }
      if (ok)
        lo = t;
      else
        hi = t;
    }
    reach = std::min(reach, lo);
  }
  return 0.99 * reach;
}

void Geometry::finish() {
  // tangency constant over the whole boundary, origin excluded
  double sup = 0;
  for (const Vec& p : boundary_samples(20000)) {
    const double r2 = p.squaredNorm();
    if (r2 <= 1e-300) continue;
    if (kind_ == GeometryKind::tangent_disk) {
      // on this circle x.n = x_2
      sup = std::max(sup, std::fabs(p(1)) / r2);
      continue;
    }
    const Vec n = outward_normal(p);
    sup = std::max(sup, std::fabs(p.dot(n)) / r2);
  }
  c_omega_raw_ = sup;
  c_omega_ = kPad * sup;

  double esup = 0;
  for (const Vec& x : collar_samples(10000, 0x5eedULL)) {
    const double r = x.norm();
    if (r == 0.0) continue;
    double d = 0;
    const Vec p = nearest_boundary_point(x, &d);
    esup = std::max(esup, p.norm() / r);
  }
  e_omega_raw_ = esup;
  e_omega_ = kPad * esup;
}

// ---------------------------------------------------------------- regions

Region Region::make_interval(double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("region interval must satisfy lo < hi");
  Region r;
  r.shape = Shape::interval;
  r.lo = lo;
  r.hi = hi;
  return r;
}

Region Region::make_ball(const Vec& c, double rad) {
  if (!(rad > 0)) throw ConfigError("region radius must be positive");
  Region r;
  r.shape = Shape::ball;
  r.center = c;
  r.radius = rad;
  return r;
}

bool Region::contains(const Vec& x) const {
  if (shape == Shape::interval) return x(0) > lo && x(0) < hi;
  return (x - center).norm() < radius;
}

bool Region::closure_contains(const Vec& x) const {
  if (shape == Shape::interval) return x(0) >= lo && x(0) <= hi;
  return (x - center).norm() <= radius;
}

Vec Region::centroid() const { return shape == Shape::interval ? Vec(0.5 * (lo + hi), 0) : center; }

bool Region::closure_inside(const Region& outer) const {
  if (shape != outer.shape) return false;
  if (shape == Shape::interval) return lo > outer.lo && hi < outer.hi;
  return (center - outer.center).norm() + radius < outer.radius;
}

double Region::closure_distance_to_origin() const {
  if (shape == Shape::interval) {
    if (lo <= 0 && hi >= 0) return 0;
    return std::min(std::fabs(lo), std::fabs(hi));
  }
  return std::max(0.0, center.norm() - radius);
}

std::string Region::describe() const {
  std::ostringstream os;
  if (shape == Shape::interval)
    os << "(" << fmt(lo) << "," << fmt(hi) << ")";
  else
    os << "B((" << fmt(center(0)) << "," << fmt(center(1)) << ")," << fmt(radius) << ")";
  return os.str();
}

std::string to_string(Zone z) {
  switch (z) {
  case Zone::near_singularity: return "near_singularity";
  case Zone::control_core: return "control_core";
  case Zone::bulk: return "bulk";
  case Zone::control_ring: return "control_ring";
  }
  return "unknown";
}

Regions make_regions(const Geometry& g, const Region& omega, const Region& omega0) {
  const auto want = g.dim() == 1 ? Region::Shape::interval : Region::Shape::ball;
  if (omega.shape != want || omega0.shape != want)
    throw ConfigError("regions must be intervals in dimension 1 and balls in dimension 2");
  if (!omega0.closure_inside(omega)) throw ConfigError("closure of omega0 must lie inside omega");
  if (omega.closure_distance_to_origin() <= 0) throw ConfigError("the origin must not lie in the closure of omega");
  if (!g.contains(omega0.centroid())) throw ConfigError("omega0 must meet the domain");
  Regions r;
  r.omega = omega;
  r.omega0 = omega0;
  r.unit_clearance = omega.closure_distance_to_origin() > 1.0;
  return r;
}

Zone region_classify(const Geometry& g, const Vec& x, const Regions& regions) {
  if (!g.contains(x, 1e-12)) throw DomainError("point outside the domain: " + fmt_point(x, g.dim()));
  if (!(regions.r0 > 0)) throw DomainError("r0 has not been set");
  if (x.norm() < regions.r0) return Zone::near_singularity;
  if (regions.omega0.contains(x)) return Zone::control_core;
  if (regions.omega.contains(x)) return Zone::control_ring;
  return Zone::bulk;
}

} // namespace singheat
