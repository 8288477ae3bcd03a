#pragma once

#include "singheat/geometry.hpp"
#include "singheat/linalg.hpp"
#include "singheat/pde.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace singheat {

class CapExceeded : public SolverError {
public:
  using SolverError::SolverError;
};

enum class Placement { boundary, interior };
std::string to_string(Placement p);

// Lumped weights m_i |x_i|^{-s} and the stiffness with per-element weight
// |x_c|^{s} evaluated at the element centroid.
VecX weighted_mass(const Grid& g, double s);
SpMat weighted_stiffness(const Grid& g, double s);

// Smallest generalized eigenpair of (K + C M - sub M_{|x|^-2}) v = nu M_{|x|^-s} v.
EigenPair hardy_eigenpair(const Grid& g, double s, double sub, double C);

// Discrete best constant of  int |grad u|^2 + C u^2 >= mu int u^2/|x|^2.
double best_hardy_constant(const Grid& g, double C = 0, EigenPair* out = nullptr);

struct HardyLevel {
  double h = 0;
  std::size_t n = 0;
  double constant = 0;
  double residual = 0;
};

struct HardyReport {
  int N = 1;
  double gamma = 2;
  Placement placement = Placement::boundary;
  std::vector<HardyLevel> levels;
  // least-squares fit constant = a + b / ln(1/h)^2
  double fit_intercept = 0, fit_slope = 0;
  bool monotone = false;     // nonincreasing within 1e-3
  bool residuals_ok = false; // all <= 1e-8
  bool dominates = false;    // boundary case: every level >= N^2/4 - 1e-6
  bool positive_ground_state = false;
};

HardyReport hardy_study(const std::vector<Grid>& grids, Placement placement, double C = 0, int workers = 1);

struct C0Options {
  double cap = 1e4;
  int iterations = 40;
};

struct C0Result {
  double value = 0;
  double nu = 0; // smallest quotient at the returned value
  int iterations = 0;
};

// Smallest C >= 0 with (K + CM - sub M_{|x|^-2}) >= M_{|x|^-gamma}, by bisection.
C0Result estimate_C0_gamma(const Grid& g, double gamma, double sub, const C0Options& opt = {});

enum class InequalityId { hardy_c1, two_constant, norm_equivalence };
std::string to_string(InequalityId id);

struct InequalityConstants {
  double gamma = 1.5;
  double mu = 0;
  double mu_N = 0.25;
  double C1 = 0, C2 = 0, C3 = 0, C0 = 0;
};

struct QuadForms {
  double grad = 0, grad_w = 0, l2 = 0, w2 = 0, wg = 0;
};

struct InequalityReport {
  InequalityId id = InequalityId::hardy_c1;
  int fields = 0;
  int violations = 0;
  double worst_margin = 0; // min over fields of (rhs - lhs)/max(|lhs|,|rhs|)
  std::uint64_t worst_seed = 0;
  bool pass() const { return violations == 0; }
};

class HardyForms {
public:
  HardyForms(const Grid& g, double gamma);
  QuadForms eval(const VecX& u) const;
  const Grid& grid() const { return *g_; }

private:
  const Grid* g_;
  SpMat Kw_;
  VecX w2_, wg_;
};

// Slack of one inequality on one field: rhs - lhs (>= 0 when it holds).
// norm_equivalence returns the smaller slack of its two sides.
void inequality_sides(InequalityId id, const InequalityConstants& c, const QuadForms& q, double& lhs, double& rhs);

VecX random_field(std::size_t n, std::uint64_t seed);

InequalityReport check_inequality(const HardyForms& forms, InequalityId id, const InequalityConstants& c,
                                  int fields = 500, std::uint64_t seed = 1);

struct TwoConstantRow {
  double C3 = 0;
  double C2_required = 0;
};

struct TwoConstantFit {
  double C2 = 0, C3 = 0;
  std::vector<TwoConstantRow> rows;
};

// Sweep C3 over 2^-k, k = 0..kmax; keep the largest C3 whose minimal C2 stays
// below the cap, and the minimal C2 for it.
TwoConstantFit fit_two_constants(const Grid& g, double gamma, double mu, double C2_cap = 1e3, int kmax = 30);

struct PhiOptions {
  double r1 = 0; // <= 0: 0.05 * R_Omega
  int samples = 200;
  double decades = 30; // radii r1 * 2^{-decades i/(samples-1)}
  bool suppress_rho = false;
};

struct PhiSample {
  Vec x = Vec::Zero();
  double r = 0;
  double h_fd = 0;
  bool retried = false;
  double margin = 0;    // -Lap phi - N^2/4 phi/|x|^2
  double remainder = 0; // P |x|^2 log(1/|x|)^2
};

struct PhiCheck {
  int N = 1;
  double r1 = 0;
  bool suppress_rho = false;
  std::vector<PhiSample> samples;
  double min_margin = 0;
  double fitted_constant = 0; // min over samples of P |x|^2 log(1/|x|)^2
  int failures = 0;
  bool pass() const { return failures == 0 && fitted_constant > 0; }
};

double phi_value(const Geometry& geo, const Vec& x, bool suppress_rho);
PhiCheck appendix_phi_check(const Geometry& geo, const PhiOptions& opt = {});

struct HardyRow {
  std::string name;
  int N = 1;
  double gamma = 2;
  double h = 0;
  double constant = 0;
  double residual = 0;
};

void append_rows(std::vector<HardyRow>& rows, const std::string& name, const HardyReport& rep);
void write_hardy_csv(std::ostream& os, const std::vector<HardyRow>& rows);

} // namespace singheat
