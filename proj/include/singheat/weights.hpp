#pragma once

#include "singheat/common.hpp"
#include "singheat/geometry.hpp"
#include "singheat/xreal.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace singheat {

struct ScalarJet {
  double value = 0;
  Vec grad = Vec::Zero();
  Mat hess = Mat::Zero();
};

// The boundary-distance profile psi1: equal to rho on a collar of Gamma,
// larger than the collar width inside, with a single critical point.
class Psi1Field {
public:
  virtual ~Psi1Field() = default;
  virtual ScalarJet eval(const Vec& x) const = 0;
  // x . grad psi1(x) - psi1(x), evaluated without cancellation near 0
  virtual double euler_defect(const Vec& x) const = 0;
  virtual std::vector<Vec> critical_points() const = 0;
  virtual std::string name() const = 0;
  // psi1 = rho for rho < collar()
  virtual double collar() const = 0;
};

// Three-slope profile on (0,L): slope 1, then -s across omega0, then -1.
class IntervalPsi1 : public Psi1Field {
public:
  IntervalPsi1(double length, double a0, double b0);
  ScalarJet eval(const Vec& x) const override;
  double euler_defect(const Vec& x) const override;
  std::vector<Vec> critical_points() const override;
  std::string name() const override { return "interval_three_slope"; }
  double collar() const override { return collar_; }
  double middle_slope() const { return s_; }

private:
  ScalarJet eval_canonical(double x) const;
  double L_, p_, w1_, m_, w2_, s_, collar_;
  bool mirrored_ = false;
};

// Radial profile about the disk center: rho outside radius R/2, a smooth
// cap with a single maximum at the center inside.
class DiskPsi1 : public Psi1Field {
public:
  explicit DiskPsi1(double radius);
  ScalarJet eval(const Vec& x) const override;
  double euler_defect(const Vec& x) const override;
  std::vector<Vec> critical_points() const override { return {Vec(0, R_)}; }
  std::string name() const override { return "disk_radial_cap"; }
  double collar() const override { return R_ - rb_; }

private:
  double R_, rb_;
};

// Constant profile; a test fixture, not a valid psi1.
class ConstantPsi1 : public Psi1Field {
public:
  explicit ConstantPsi1(double c) : c_(c) {}
  ScalarJet eval(const Vec&) const override { return {c_, Vec::Zero(), Mat::Zero()}; }
  double euler_defect(const Vec&) const override { return -c_; }
  std::vector<Vec> critical_points() const override { return {}; }
  std::string name() const override { return "constant"; }
  double collar() const override { return 0; }

private:
  double c_;
};

struct Clause {
  std::string label;
  double value;
};

struct RecipeChoice {
  double value = 0;
  std::string binding;
  std::vector<Clause> clauses;
};

struct DeltaInputs {
  double delta0 = 0, c_omega = 0, D = 0, r_omega = 0, dpsi1 = 0, d2psi1 = 0;
};

struct R0Inputs {
  double dpsi = 0, d2psi = 0, psi = 0, gamma = 1.5, mu = 0, C3 = 0, D = 0, delta0 = 0, beta0 = 0;
};

RecipeChoice choose_delta(const DeltaInputs& in);
RecipeChoice choose_r0(const R0Inputs& in);

struct PsiJet {
  double value = 0;
  Vec grad = Vec::Zero();
  Mat hess = Mat::Zero();
  double lap = 0;
  double x_dot_grad = 0;
  // x . grad psi - delta psi1
  double scaled_euler_defect = 0;
};

struct PsiKit {
  std::shared_ptr<const Psi1Field> psi1;
  int dim = 1;
  double delta0 = 0;
  double delta = 1;
  double psi1_sup = 0, dpsi1_sup = 0, d2psi1_sup = 0;
  double D = 0;      // sup |x.grad psi1 - psi1| / |x|^2, padded
  double collar = 0; // width on which psi1 = rho
  RecipeChoice delta_choice;
  bool delta_overridden = false;

  double psi_sup() const { return delta * (psi1_sup + 1); }
  double dpsi_sup() const { return delta * dpsi1_sup; }
  double d2psi_sup() const { return delta * d2psi1_sup; }

  PsiJet psi(const Vec& x) const;
};

struct PsiBuildOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double delta_override = 0; // <= 0 means use the recipe
};

// Builds psi1 for the geometry, verifies its invariants on samples, and
// selects delta.
PsiKit build_psi(const Geometry& g, const Regions& regions, const PsiBuildOptions& opt = {});

// Kit around an explicit psi1 (fixtures); constants taken as given.
PsiKit make_kit(std::shared_ptr<const Psi1Field> psi1, int dim, double delta);

DeltaInputs delta_inputs(const PsiKit& kit, const Geometry& g);
R0Inputs r0_inputs(const PsiKit& kit, double gamma, double mu, double C3);

// C = 1.05 sup_{closure}(|x|^2 psi + (|x|/r0)^lambda e^{lambda psi}) + 1
XReal choose_C_lambda(double lambda, const PsiKit& kit, const Geometry& g, double r0, std::uint64_t seed = 7);

struct ScaledVec {
  XReal scale; // >= 1
  Vec v = Vec::Zero();
  XReal squared_norm() const { return scale * scale * XReal(v.squaredNorm()); }
  XReal dot(const Vec& a) const { return scale * XReal(v.dot(a)); }
};

// tau = tau_x2 + tau_phi with tau_x2 = |x|^2 psi and
// tau_phi = (|x|/r0)^lambda e^{lambda psi} = P * |x|^2, P = e^{lambda psi} |x|^{lambda-2} / r0^lambda.
// The phi part is stored as P times normalized value/gradient/Hessian/Laplacian.
struct TauJet {
  Vec x = Vec::Zero();
  int dim = 1;
  double lambda = 0;
  double r2 = 0;
  PsiJet psi;

  double x2_value = 0;
  Vec x2_grad = Vec::Zero();
  Mat x2_hess = Mat::Zero();
  double x2_lap = 0;

  XReal P;
  double n_value = 0;
  Vec n_grad = Vec::Zero();
  Mat n_hess = Mat::Zero();
  double n_lap = 0;

  XReal phi_value() const { return P * XReal(n_value); }
  XReal value() const { return XReal(x2_value) + phi_value(); }
  ScaledVec grad() const;
  XReal hess_form(const Vec& a, const Vec& b) const {
    return XReal(a.dot(x2_hess * b)) + P * XReal(a.dot(n_hess * b));
  }
  XReal phi_hess_form(const Vec& a) const { return P * XReal(a.dot(n_hess * a)); }
  XReal lap() const { return XReal(x2_lap) + P * XReal(n_lap); }
  XReal phi_lap() const { return P * XReal(n_lap); }

  // Plain double versions; only meaningful while the weight fits in a double.
  double phi_value_d() const { return phi_value().to_double(); }
  Vec phi_grad_d() const { return P.to_double() * n_grad; }
  Mat phi_hess_d() const { return P.to_double() * n_hess; }
  double phi_lap_d() const { return phi_lap().to_double(); }
  double value_d() const { return x2_value + phi_value_d(); }
  Vec grad_d() const { return x2_grad + phi_grad_d(); }
  Mat hess_d() const { return x2_hess + phi_hess_d(); }
  double lap_d() const { return x2_lap + phi_lap_d(); }
};

struct SigmaJet {
  XReal value, dt, dtt;
  XReal scale; // spatial derivatives are scale * (grad_n, hess_n, lap_n)
  Vec grad_n = Vec::Zero();
  Mat hess_n = Mat::Zero();
  double lap_n = 0;
  Vec grad_d() const { return scale.to_double() * grad_n; }
  Mat hess_d() const { return scale.to_double() * hess_n; }
  double lap_d() const { return scale.to_double() * lap_n; }
};

struct WeightParams {
  double lambda = 8;
  double s = 1;
  double gamma = 1.5;
  double T = 1;
  double r0 = 0.1;
  XReal C_lambda = XReal(0.0);
};

class CarlemanWeight {
public:
  CarlemanWeight(const PsiKit& kit, WeightParams p);

  const WeightParams& params() const { return p_; }
  const PsiKit& kit() const { return kit_; }
  double k() const { return 1 + 2 / p_.gamma; }

  double theta(double t) const;
  double theta_dt(double t) const;
  double theta_dtt(double t) const;

  // radial cutoff: 0 for |x| <= r0/2, 1/N for |x| >= r0
  double alpha(const Vec& x) const;

  TauJet tau(const Vec& x) const;
  SigmaJet sigma(double t, const Vec& x, bool times_s = false) const;

private:
  void check_window(double t) const;
  PsiKit kit_;
  WeightParams p_;
};

} // namespace singheat
