#include "singheat/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace singheat {

VecX Grid::dist2() const {
  VecX d(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) d(static_cast<Eigen::Index>(i)) = (nodes[i] - singular_point).squaredNorm();
  return d;
}

Grid interval_grid(double length, int cells) {
  if (!(length > 0) || cells < 2) throw ConfigError("interval grid needs a positive length and at least 2 cells");
  Grid g;
  g.dim = 1;
  g.label = "interval";
  g.h = length / cells;
  for (int i = 0; i <= cells; ++i) {
    g.all_nodes.push_back(Vec(length * i / cells, 0));
    g.unknown_of.push_back(i == 0 || i == cells ? -1 : i - 1);
  }
  for (int i = 0; i < cells; ++i) g.elements.push_back({i, i + 1, -1});
  const int n = cells - 1;
  std::vector<Eigen::Triplet<double>> tr;
  for (int i = 0; i < n; ++i) {
    g.nodes.push_back(g.all_nodes[static_cast<std::size_t>(i + 1)]);
    g.mass.push_back(g.h);
    tr.emplace_back(i, i, 2 / g.h);
    if (i > 0) tr.emplace_back(i, i - 1, -1 / g.h);
    if (i + 1 < n) tr.emplace_back(i, i + 1, -1 / g.h);
  }
  g.K.resize(n, n);
  g.K.setFromTriplets(tr.begin(), tr.end());
  return g;
}

namespace {

Vec unit_at(int j, int m) {
  // angle -pi/2 + 2 pi j/m, exact at quarter turns
  if ((4 * j) % m == 0) {
    switch ((4 * j) / m) {
    case 0: return Vec(0, -1);
    case 1: return Vec(1, 0);
    case 2: return Vec(0, 1);
    default: return Vec(-1, 0);
    }
  }
  const double a = -M_PI / 2 + 2 * M_PI * j / m;
  return Vec(std::cos(a), std::sin(a));
}

} // namespace

Grid disk_ring_grid(double radius, int rings, bool tangent, double grading) {
  if (!(radius > 0) || rings < 1) throw ConfigError("disk grid needs a positive radius and at least one ring");
  Grid g;
  g.dim = 2;
  g.label = tangent ? "tangent_disk" : "centered_disk";
  const Vec c = tangent ? Vec(0, radius) : Vec(0, 0);
  g.singular_point = Vec(0, 0);

  std::vector<std::vector<int>> ring_idx;
  g.all_nodes.push_back(c);
  ring_idx.push_back({0});
  for (int k = 1; k <= rings; ++k) {
    const int m = 6 * k;
    const double r = radius * std::pow(static_cast<double>(k) / rings, grading);
    std::vector<int> idx;
    for (int j = 0; j < m; ++j) {
      idx.push_back(static_cast<int>(g.all_nodes.size()));
      Vec p = c + r * unit_at(j, m);
      if (tangent && k == rings && j == 0) p = Vec(0, 0);
      g.all_nodes.push_back(p);
    }
    ring_idx.push_back(idx);
  }
  for (int k = 1; k <= rings; ++k) {
    const auto& in = ring_idx[static_cast<std::size_t>(k - 1)];
    const auto& out = ring_idx[static_cast<std::size_t>(k)];
    const int mi = static_cast<int>(in.size()), mo = static_cast<int>(out.size());
    if (k == 1) {
      for (int j = 0; j < 6; ++j) g.elements.push_back({0, out[j], out[(j + 1) % 6]});
      continue;
    }
    int i = 0, o = 0;
    while (i < mi || o < mo) {
      if (o < mo && static_cast<double>(o + 1) / mo <= static_cast<double>(i + 1) / mi) {
        g.elements.push_back({in[i % mi], out[o], out[(o + 1) % mo]});
        ++o;
      } else {
        g.elements.push_back({in[i % mi], out[o % mo], in[(i + 1) % mi]});
        ++i;
      }
    }
  }

  const std::size_t nall = g.all_nodes.size();
  std::vector<char> dirichlet(nall, 0);
  for (int j : ring_idx.back()) dirichlet[static_cast<std::size_t>(j)] = 1;
  if (!tangent) dirichlet[0] = 1;
  g.unknown_of.assign(nall, -1);
  int n = 0;
  for (std::size_t i = 0; i < nall; ++i)
    if (!dirichlet[i]) {
      g.unknown_of[i] = n++;
      g.nodes.push_back(g.all_nodes[i]);
    }
  g.mass.assign(static_cast<std::size_t>(n), 0.0);

  std::vector<Eigen::Triplet<double>> tr;
  double hmax = 0;
  for (const auto& e : g.elements) {
    const Vec& p0 = g.all_nodes[static_cast<std::size_t>(e[0])];
    const Vec& p1 = g.all_nodes[static_cast<std::size_t>(e[1])];
    const Vec& p2 = g.all_nodes[static_cast<std::size_t>(e[2])];
    Mat B;
    B.col(0) = p1 - p0;
    B.col(1) = p2 - p0;
    const double area = 0.5 * std::fabs(B.determinant());
    Eigen::Matrix<double, 2, 3> dphi;
    dphi << -1, 1, 0, -1, 0, 1;
    const Eigen::Matrix<double, 2, 3> G = B.inverse().transpose() * dphi;
    const Eigen::Matrix3d Ke = area * G.transpose() * G;
    hmax = std::max({hmax, (p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
    for (int a = 0; a < 3; ++a) {
      const int ia = g.unknown_of[static_cast<std::size_t>(e[a])];
      if (ia < 0) continue;
      g.mass[static_cast<std::size_t>(ia)] += area / 3;
      for (int b = 0; b < 3; ++b) {
        const int ib = g.unknown_of[static_cast<std::size_t>(e[b])];
        if (ib >= 0) tr.emplace_back(ia, ib, Ke(a, b));
      }
    }
  }
  g.h = hmax;
  g.K.resize(n, n);
  g.K.setFromTriplets(tr.begin(), tr.end());
  // exact symmetry
  g.K = 0.5 * (g.K + SpMat(g.K.transpose()));
  return g;
}

SpMat assemble(const Grid& g, double mu, double C) {
  const Eigen::Index n = static_cast<Eigen::Index>(g.size());
  VecX s(n), pot(n);
  const VecX d2 = g.dist2();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(d2(i) > 0)) throw DomainError("grid has an unknown at the singular point");
    s(i) = 1 / std::sqrt(g.mass[static_cast<std::size_t>(i)]);
    pot(i) = C - mu / d2(i);
  }
  SpMat A = s.asDiagonal() * g.K * s.asDiagonal();
  SpMat D(n, n);
  std::vector<Eigen::Triplet<double>> tr;
  for (Eigen::Index i = 0; i < n; ++i) tr.emplace_back(i, i, pot(i));
  D.setFromTriplets(tr.begin(), tr.end());
  A += D;
  A = 0.5 * (A + SpMat(A.transpose()));
  A.makeCompressed();
  return A;
}

VecX to_scaled(const Grid& g, const VecX& u) {
  VecX v(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) v(i) = std::sqrt(g.mass[static_cast<std::size_t>(i)]) * u(i);
  return v;
}

VecX to_nodal(const Grid& g, const VecX& v) {
  VecX u(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) u(i) = v(i) / std::sqrt(g.mass[static_cast<std::size_t>(i)]);
  return u;
}

std::string to_string(Scheme s) { return s == Scheme::implicit_euler ? "implicit_euler" : "crank_nicolson"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "implicit_euler") return Scheme::implicit_euler;
  if (s == "crank_nicolson") return Scheme::crank_nicolson;
  throw ConfigError("unknown time scheme '" + s + "'");
}

void check_time_step(const Grid& g, double dt, Scheme scheme) {
  if (!(dt > 0)) throw ConfigError("time step must be positive");
  if (scheme == Scheme::crank_nicolson && dt > g.h * (1 + 1e-12))
    throw ConfigError("crank_nicolson needs dt <= h (dt " + fmt(dt) + ", h " + fmt(g.h) + ")");
}

Propagator::Propagator(const SpMat& A, double dt, Scheme scheme) : A_(A), dt_(dt), scheme_(scheme) {
  if (!(dt > 0)) throw ConfigError("time step must be positive");
  const double a = scheme == Scheme::implicit_euler ? 1.0 : 0.5;
  SpMat M(A.rows(), A.cols());
  M.setIdentity();
  M += (a * dt) * A;
  fact_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(M);
  if (fact_->info() != Eigen::Success) throw SolverError("factorization of the step matrix failed");
}

VecX Propagator::resolvent(const VecX& v) const { return fact_->solve(v); }

VecX Propagator::explicit_part(const VecX& v) const {
  if (scheme_ == Scheme::implicit_euler) return v;
  return v - (0.5 * dt_) * (A_ * v);
}

VecX Propagator::apply(const VecX& v) const { return resolvent(explicit_part(v)); }

double Propagator::amplification(double eig) const {
  if (scheme_ == Scheme::implicit_euler) return 1 / (1 + dt_ * eig);
  return (1 - 0.5 * dt_ * eig) / (1 + 0.5 * dt_ * eig);
}

Trajectory solve_forward(const Propagator& P, const VecX& v0, int steps, const std::function<VecX(int)>& F, int stride) {
  if (steps < 0) throw ConfigError("negative step count");
  stride = std::max(1, stride);
  Trajectory tr;
  VecX v = v0;
  tr.t.push_back(0);
  tr.v.push_back(v);
  const double dt = P.dt();
  VecX f_now = F ? F(0) : VecX();
  for (int n = 0; n < steps; ++n) {
    VecX rhs = P.explicit_part(v);
    if (F) {
      const VecX f_next = F(n + 1);
      if (P.scheme() == Scheme::implicit_euler)
        rhs += dt * f_next;
      else
        rhs += (0.5 * dt) * (f_now + f_next);
      f_now = f_next;
    }
    v = P.resolvent(rhs);
    if ((n + 1) % stride == 0 || n + 1 == steps) {
      tr.t.push_back((n + 1) * dt);
      tr.v.push_back(v);
    }
  }
  return tr;
}

Trajectory solve_adjoint(const Propagator& P, const VecX& wT, int steps, int stride) {
  stride = std::max(1, stride);
  std::vector<VecX> w(static_cast<std::size_t>(steps) + 1);
  w[static_cast<std::size_t>(steps)] = wT;
  for (int n = steps - 1; n >= 0; --n) w[static_cast<std::size_t>(n)] = P.apply(w[static_cast<std::size_t>(n) + 1]);
  Trajectory tr;
  for (int n = 0; n <= steps; ++n) {
    if (n % stride == 0 || n == steps) {
      tr.t.push_back(n * P.dt());
      tr.v.push_back(w[static_cast<std::size_t>(n)]);
    }
  }
  return tr;
}

double smallest_eigenvalue(const SpMat& A) { return smallest_eigenpair(A, VecX::Ones(A.rows())).value; }

double growth_rate(const Propagator& P, double lambda_min) {
  if (P.scheme() == Scheme::implicit_euler && !(1 + P.dt() * lambda_min > 0))
    throw SolverError("implicit Euler step matrix is not positive definite");
  const double g = std::fabs(P.amplification(lambda_min));
  return std::max(0.0, std::log(std::max(g, 1.0)) / P.dt());
}

EnergyCheck energy_monotonicity_check(const Trajectory& adj, double c, double T, double slack) {
  EnergyCheck out;
  out.c = c;
  const std::size_t n = adj.v.size();
  std::vector<double> e2(n);
  for (std::size_t i = 0; i < n; ++i) e2[i] = adj.v[i].squaredNorm();
  out.monotone = true;
  out.worst_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (e2[i] == 0.0) continue;
    const double ratio = std::exp(2 * c * (adj.t[i + 1] - adj.t[i])) * e2[i + 1] / e2[i];
    out.worst_ratio = std::min(out.worst_ratio, ratio);
    if (ratio < 1 - slack) out.monotone = false;
  }
  // trapezoid of |w|^2 over [T/4, 3T/4] with linear interpolation at the ends
  const double a = T / 4, b = 3 * T / 4;
  auto interp = [&](double t) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (t >= adj.t[i] && t <= adj.t[i + 1]) {
        const double s = (t - adj.t[i]) / (adj.t[i + 1] - adj.t[i]);
        return (1 - s) * e2[i] + s * e2[i + 1];
      }
    }
    return e2.back();
  };
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(a, interp(a));
  for (std::size_t i = 0; i < n; ++i)
    if (adj.t[i] > a && adj.t[i] < b) pts.emplace_back(adj.t[i], e2[i]);
  pts.emplace_back(b, interp(b));
  double integral = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    integral += 0.5 * (pts[i].second + pts[i + 1].second) * (pts[i + 1].first - pts[i].first);
  out.integrated_lhs = integral;
  out.integrated_rhs = 0.5 * T * std::exp(-1.5 * T * c) * e2.front();
  out.integrated_ok = out.integrated_lhs >= out.integrated_rhs * (1 - slack);
  return out;
}

std::string classify_ratios(const std::vector<DichotomyRow>& rows) {
  if (rows.size() < 2) return "inconclusive";
  bool stable = true, blowup = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double r = rows[i].ratio;
    if (rows[i].capped || rows[i - 1].capped || !(r >= 1 / 1.05 && r <= 1.05)) stable = false;
    if (!(r >= 10)) blowup = false;
  }
  if (stable) return "stable";
  if (blowup) return "blow-up trend";
  return "inconclusive";
}

DichotomyReport blowup_experiment(double mu, const BlowupOptions& opt, int workers) {
  if (opt.levels < 2) throw ConfigError("the refinement study needs at least two levels");
  DichotomyReport rep;
  rep.mu = mu;
  rep.rows.resize(static_cast<std::size_t>(opt.levels));
  parallel_for(static_cast<std::size_t>(opt.levels), workers, [&](std::size_t j) {
    const int cells = opt.base_cells << j;
    const Grid g = interval_grid(opt.length, cells);
    const SpMat A = assemble(g, mu, 0);
    VecX u0(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.nodes[i](0);
      const double b = x < opt.support ? x * (opt.support - x) : 0.0;
      u0(static_cast<Eigen::Index>(i)) = b * b;
    }
    VecX v = to_scaled(g, u0);
    const double n0 = v.norm();
    double dt = opt.dt;
    SpMat I(A.rows(), A.cols());
    I.setIdentity();
    for (int tries = 0;; ++tries) {
      Eigen::SimplicialLDLT<SpMat> f(SpMat(I + (2 * dt) * A));
      bool pd = f.info() == Eigen::Success;
      if (pd) {
        const VecX d = f.vectorD();
        for (Eigen::Index i = 0; i < d.size(); ++i)
          if (!(d(i) > 0)) {
            pd = false;
            break;
          }
      }
      if (pd) break;
      if (tries > 60) throw SolverError("no stable time step found");
      dt *= 0.5;
    }
    const int steps = static_cast<int>(std::llround(opt.t_probe / dt));
    const Propagator P(A, dt, Scheme::implicit_euler);
    double lognorm = 0;
    bool capped = false;
    for (int s = 0; s < steps; ++s) {
      v = P.apply(v);
      const double nv = v.norm();
      if (nv > 1e100) {
        lognorm += std::log(nv);
        v /= nv;
      }
      if (lognorm + std::log(v.norm()) - std::log(n0) > opt.log_cap) {
        capped = true;
        break;
      }
    }
    DichotomyRow& row = rep.rows[j];
    row.level = static_cast<int>(j);
    row.h = g.h;
    row.dt = dt;
    row.capped = capped;
    row.norm = capped ? std::numeric_limits<double>::infinity() : std::exp(lognorm) * v.norm();
  });
  for (std::size_t j = 0; j < rep.rows.size(); ++j) {
    if (j == 0) {
      rep.rows[j].ratio = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const DichotomyRow& p = rep.rows[j - 1];
    DichotomyRow& r = rep.rows[j];
    if (std::isinf(r.norm))
      r.ratio = std::numeric_limits<double>::infinity();
    else
      r.ratio = r.norm / p.norm;
  }
  rep.classification = classify_ratios(rep.rows);
  return rep;
}

void write_dichotomy_csv(std::ostream& os, const DichotomyReport& rep) {
  os << "level,h,norm,ratio,classification\n";
  for (const auto& r : rep.rows)
    os << r.level << ',' << fmt(r.h) << ',' << fmt(r.norm) << ',' << fmt(r.ratio) << ',' << rep.classification << '\n';
}

void write_trajectory_csv(std::ostream& os, const Grid& g, const Trajectory& tr, int stride) {
  stride = std::max(1, stride);
  os << "t,node,value\n";
  for (std::size_t k = 0; k < tr.v.size(); k += static_cast<std::size_t>(stride)) {
    const VecX u = to_nodal(g, tr.v[k]);
    for (Eigen::Index i = 0; i < u.size(); ++i) os << fmt(tr.t[k]) << ',' << i << ',' << fmt(u(i)) << '\n';
  }
}

} // namespace singheat
