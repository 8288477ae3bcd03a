#pragma once

#include "singheat/geometry.hpp"
#include "singheat/weights.hpp"
#include "singheat/xreal.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace singheat {

struct HypothesisError : DomainError {
  using DomainError::DomainError;
};

struct AuditContext {
  Geometry geometry;
  Regions regions; // r0 set
  PsiKit kit;
  double gamma = 1.5;
  double s = 1;
  double T = 1;
};

struct AuditSample {
  Vec x = Vec::Zero();
  bool boundary = false;
  double dir_offset = 0; // in [0,1), rotates the direction fan
};

struct AuditOptions {
  std::size_t n_near = 4000;
  std::size_t n_bulk = 4000;
  std::size_t n_core = 2000;
  std::size_t n_boundary = 2000;
  int directions = 64;
  std::uint64_t seed = 1;
  int workers = 1;
  // required relative margin: LHS - RHS >= rel_margin * max(|LHS|,|RHS|)
  double rel_margin = 0;
  double C_lambda_override = 0; // > 0 replaces the sampled recipe
};

struct CheckRecord {
  std::string id;
  std::string region;
  double lambda = 0;
  std::size_t n_samples = 0;
  XReal min_margin;
  bool has_margin = false;
  std::size_t violations = 0;
  Vec worst_x = Vec::Zero();
  bool pass() const { return violations == 0; }
};

struct AuditConstants {
  double D1 = 0, D4 = 0, D5 = 0, D6 = 0, D7 = 0, D8 = 0;
};

struct AuditReport {
  double lambda = 0;
  XReal C_lambda;
  std::vector<CheckRecord> checks;
  AuditConstants constants;
  std::size_t n_samples = 0;
  double max_identity_residual = 0;
  bool pass = false;
  const CheckRecord* find(const std::string& id) const;
  std::string first_failure() const;
};

// The three pieces of 2 D^2tau(grad tau, grad tau) - alpha Lap tau |grad tau|^2.
struct TTerms {
  XReal lhs, t1, t2, t3;
  XReal grad_sq;
};

TTerms t_terms(const CarlemanWeight& w, const Vec& x);
// |lhs - (t1+t2+t3)| / (1 + |lhs|)
double identity_residual(const TTerms& t);
// grad sigma . n / theta at a boundary point
XReal boundary_sign_value(const CarlemanWeight& w, const Geometry& g, const Vec& p);

std::vector<AuditSample> make_audit_samples(const AuditContext& ctx, const AuditOptions& opt, std::uint64_t seed);

AuditConstants estimate_constants(const AuditContext& ctx, const CarlemanWeight& w, const std::vector<AuditSample>& samples,
                                  const AuditOptions& opt);

std::vector<CheckRecord> run_checks(const AuditContext& ctx, const CarlemanWeight& w, const std::vector<AuditSample>& samples,
                                    const AuditConstants& c, const AuditOptions& opt);

// Full audit at one lambda: constants on one sample set, checks on a fresh one.
AuditReport audit_at_lambda(const AuditContext& ctx, double lambda, const AuditOptions& opt);

struct LambdaExhausted : CheckFailure {
  LambdaExhausted(const std::string& msg, std::vector<AuditReport> all)
      : CheckFailure(msg), report(all.back()), tried(std::move(all)) {}
  AuditReport report; // the last one tried
  std::vector<AuditReport> tried;
};

struct Lambda0Result {
  double lambda0 = 0;
  AuditReport report;
  std::vector<AuditReport> tried;
};

Lambda0Result find_lambda0(const AuditContext& ctx, const std::vector<double>& grid, const AuditOptions& opt);

void write_audit_csv(std::ostream& os, const AuditReport& rep, int dim);

} // namespace singheat
