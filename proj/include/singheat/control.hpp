#pragma once

#include "singheat/geometry.hpp"
#include "singheat/pde.hpp"

#include <Eigen/Dense>

#include <ostream>
#include <string>
#include <vector>

namespace singheat {

class SupercriticalError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

class DegenerateObservation : public SolverError {
public:
  using SolverError::SolverError;
};

struct ControlSetup {
  double mu = 0;
  double T = 0.5;
  int steps = 200;
  Scheme scheme = Scheme::implicit_euler;
};

// Discrete control-to-state map L and its transpose for one grid, potential,
// control region and time grid. Controls are sequences F_0..F_K of scaled
// fields; their inner product uses time weights q_m (right rectangle rule for
// implicit Euler, trapezoid for Crank-Nicolson).
class HumSolver {
public:
  HumSolver(const Grid& g, const Region& omega, const ControlSetup& setup);

  const Grid& grid() const { return *g_; }
  const ControlSetup& setup() const { return setup_; }
  const Propagator& propagator() const { return P_; }
  double dt() const { return P_.dt(); }
  int steps() const { return setup_.steps; }
  const VecX& mask() const { return mask_; }
  const std::vector<double>& time_weights() const { return q_; }

  // L: controls -> v(T) from v0 = 0
  VecX control_to_state(const std::vector<VecX>& F) const;
  // forward solve from v0 with controls (empty for none); returns v(T)
  VecX forward(const VecX& v0, const std::vector<VecX>& F) const;
  // L^*: terminal adjoint data -> controls, masked to omega
  std::vector<VecX> controls_from(const VecX& wT) const;
  // Lambda = L L^*
  VecX gramian_apply(const VecX& wT) const;
  double control_norm2(const std::vector<VecX>& F) const;
  // w(0) = S^K w_T
  VecX adjoint_initial(const VecX& wT) const;

  Eigen::MatrixXd gramian_dense(int workers = 1) const;

private:
  const Grid* g_;
  ControlSetup setup_;
  SpMat A_;
  Propagator P_;
  VecX mask_;
  std::vector<double> q_;
};

struct ControlResult {
  std::vector<VecX> control; // F_m in scaled variables, zero outside omega
  VecX wT;
  double epsilon = 0;
  double terminal_norm = 0;      // re-solved forward with the control
  double free_terminal_norm = 0; // f = 0
  double predicted_terminal = 0; // epsilon |w_T|
  double J = 0;
  int iterations = 0;
  std::vector<double> residuals;
  bool terminal_audit_ok = false;
};

ControlResult hum_control(const HumSolver& hs, const VecX& v0, double epsilon, double cg_tol = 1e-10,
                          int max_iter = 500);

struct ObservabilityResult {
  double value = 0;
  double residual = 0;
  int iterations = 0;
  double shift = 0;
};

// max over w_T of |w(0)|^2 / <Lambda w_T, w_T>, by power iteration with
// (Lambda + eta I)^{-1} S^{2K}, eta = eta_rel |Lambda|.
ObservabilityResult observability_constant(const HumSolver& hs, double eta_rel = 1e-12, int workers = 1);

// Same quotient through a dense generalized symmetric eigensolve.
double observability_constant_dense(const HumSolver& hs, double eta_rel = 1e-12, int workers = 1);

double gramian_symmetry_residual(const HumSolver& hs, int probes, std::uint64_t seed);

struct ScanRow {
  double value = 0;
  double C_T = 0;
  double terminal_norm = 0;
  int iterations = 0;
  std::string error;
};

enum class ScanParameter { mu, T };

struct ScanSetup {
  ControlSetup base;
  double dt = 0.5 / 200;
  double epsilon = 1e-6;
  double cg_tol = 1e-10;
  int max_iter = 500;
};

std::vector<ScanRow> cost_scan(const Grid& g, const Region& omega, const VecX& v0, ScanParameter p,
                               const std::vector<double>& values, const ScanSetup& setup, int workers = 1);

void write_control_csv(std::ostream& os, const std::vector<std::pair<ControlSetup, ControlResult>>& runs);
void write_scan_csv(std::ostream& os, ScanParameter p, const std::vector<ScanRow>& rows);

} // namespace singheat
