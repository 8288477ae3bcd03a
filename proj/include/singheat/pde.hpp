#pragma once

#include "singheat/common.hpp"
#include "singheat/linalg.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace singheat {

// Nodal P1 discretization. Unknowns are the interior nodes; the singular
// point is always a Dirichlet node.
struct Grid {
  int dim = 1;
  std::string label;
  double h = 0;
  Vec singular_point = Vec::Zero();
  std::vector<Vec> nodes;   // unknowns
  std::vector<double> mass; // lumped, per unknown
  SpMat K;                  // stiffness on unknowns

  std::vector<Vec> all_nodes;
  std::vector<int> unknown_of; // -1 for Dirichlet nodes
  // triangles in 2-D; segments (third index -1) in 1-D
  std::vector<std::array<int, 3>> elements;

  std::size_t size() const { return nodes.size(); }
  // |x_i - singular point|^2 at each unknown
  VecX dist2() const;
};

Grid interval_grid(double length, int cells);

// Concentric ring triangulation of the disk of radius R: ring k has 6k
// nodes at radius R (k/n)^grading. `tangent` places the center at (0,R) so
// the origin is a boundary node; otherwise the center is the origin and its
// node is pinned.
Grid disk_ring_grid(double radius, int rings, bool tangent, double grading = 1.0);

// Symmetric operator for -Lap - mu/|x|^2 + C in the variables v = M^{1/2} u.
SpMat assemble(const Grid& g, double mu, double C);

VecX to_scaled(const Grid& g, const VecX& u);
VecX to_nodal(const Grid& g, const VecX& v);

enum class Scheme { implicit_euler, crank_nicolson };
std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

// dt > 0, and dt <= h for crank_nicolson.
void check_time_step(const Grid& g, double dt, Scheme scheme);

// One-step propagator S = (I + a dt A)^{-1} (I - (1-a) dt A), a = 1 or 1/2.
class Propagator {
public:
  Propagator(const SpMat& A, double dt, Scheme scheme);
  double dt() const { return dt_; }
  Scheme scheme() const { return scheme_; }
  Eigen::Index size() const { return A_.rows(); }
  const SpMat& op() const { return A_; }

  VecX apply(const VecX& v) const;     // S v
  VecX resolvent(const VecX& v) const; // (I + a dt A)^{-1} v
  VecX explicit_part(const VecX& v) const;
  // amplification factor of one step for an eigenvalue of A
  double amplification(double eig) const;

private:
  SpMat A_;
  double dt_;
  Scheme scheme_;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> fact_;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<VecX> v; // scaled variables
};

// Forward march of v' + A v = F from v0 over `steps` steps. F(n) is the
// source at time n dt (may be empty for none).
Trajectory solve_forward(const Propagator& P, const VecX& v0, int steps, const std::function<VecX(int)>& F = {},
                         int stride = 1);

// Backward march of the adjoint from terminal data; entries ordered by
// increasing time, w_n = S^{K-n} w_T.
Trajectory solve_adjoint(const Propagator& P, const VecX& wT, int steps, int stride = 1);

// Smallest eigenvalue of A and the resulting exponential rate
// c = max(0, ln max |g| / dt).
double smallest_eigenvalue(const SpMat& A);
double growth_rate(const Propagator& P, double lambda_min);

struct EnergyCheck {
  double c = 0;
  bool monotone = false;
  double worst_ratio = 0; // min over steps of E_{n+1}/E_n
  bool integrated_ok = false;
  double integrated_lhs = 0, integrated_rhs = 0;
  bool pass() const { return monotone && integrated_ok; }
};

EnergyCheck energy_monotonicity_check(const Trajectory& adjoint, double c, double T, double slack = 1e-8);

struct BlowupOptions {
  double length = 1;
  int base_cells = 8192;
  int levels = 4;
  double t_probe = 0.05;
  double dt = 1e-5;
  double support = 0.25;
  double log_cap = 460.517018598809; // ln 1e200
};

struct DichotomyRow {
  int level = 0;
  double h = 0;
  double dt = 0;
  double norm = 0; // +inf once the growth cap is exceeded
  double ratio = 0;
  bool capped = false;
};

struct DichotomyReport {
  double mu = 0;
  std::vector<DichotomyRow> rows;
  std::string classification;
};

DichotomyReport blowup_experiment(double mu, const BlowupOptions& opt = {}, int workers = 1);
std::string classify_ratios(const std::vector<DichotomyRow>& rows);

void write_dichotomy_csv(std::ostream& os, const DichotomyReport& rep);
void write_trajectory_csv(std::ostream& os, const Grid& g, const Trajectory& tr, int stride);

} // namespace singheat
