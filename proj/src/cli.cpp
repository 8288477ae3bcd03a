#include "singheat/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace singheat {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- parsing

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

void read_opt(const json& j, const char* key, std::optional<double>& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  if (!it->is_number()) throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  out = it->get<double>();
}

Region parse_region(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  if (j.contains("interval")) {
    check_keys(j, where, {"interval"});
    std::vector<double> v;
    read(j, "interval", v, where);
    if (v.size() != 2) throw ConfigError(where + ".interval needs [lo, hi]");
    return Region::make_interval(v[0], v[1]);
  }
  check_keys(j, where, {"center", "radius"});
  std::vector<double> c;
  double r = 0;
  read(j, "center", c, where);
  read(j, "radius", r, where);
  if (c.size() != 2) throw ConfigError(where + ".center needs [x, y]");
  return Region::make_ball(Vec(c[0], c[1]), r);
}

json region_json(const Region& r) {
  if (r.shape == Region::Shape::interval) return json{{"interval", {r.lo, r.hi}}};
  return json{{"center", {r.center(0), r.center(1)}}, {"radius", r.radius}};
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

// ---------------------------------------------------------------- output

struct Outputs {
  std::filesystem::path dir;
  const std::vector<HeaderRow>* header = nullptr;

  std::ofstream open(const std::string& name) const {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + (dir / name).string());
    if (header) write_header(os, *header);
    return os;
  }
};

void write_summary(const Outputs& out, const std::vector<SummaryRow>& rows) {
  auto os = out.open("summary.csv");
  os << "item,value,status\n";
  for (const auto& r : rows) os << r.item << ',' << sanitize(r.value) << ',' << r.status << '\n';
}

const char* status(bool ok) { return ok ? "pass" : "fail"; }

std::uint64_t effective_seed(const Scenario& sc, const RunOptions& opt) { return opt.seed ? *opt.seed : sc.seed; }

} // namespace

Geometry GeometrySpec::build() const {
  if (kind == "interval") return Geometry::interval(length);
  if (kind == "tangent_disk") return Geometry::tangent_disk(radius);
  if (kind == "parabola_cap") return Geometry::parabola_cap(curvature, cap_radius);
  throw ConfigError("unknown geometry kind '" + kind + "'");
}

Scenario parse_scenario(const json& j) {
  Scenario sc;
  sc.raw = j;
  check_keys(j, "scenario",
             {"name", "geometry", "omega", "omega0", "gamma", "s", "T", "mu", "lambda_grid", "seed", "psi_samples",
              "audit", "overrides", "hardy", "simulate", "control", "observability"});
  read(j, "name", sc.name, "scenario");
  if (!j.contains("geometry") || !j.contains("omega") || !j.contains("omega0"))
    throw ConfigError("scenario needs geometry, omega and omega0");
  {
    const json& g = j.at("geometry");
    check_keys(g, "geometry", {"kind", "length", "radius", "curvature", "cap_radius"});
    read(g, "kind", sc.geometry.kind, "geometry");
    read(g, "length", sc.geometry.length, "geometry");
    read(g, "radius", sc.geometry.radius, "geometry");
    read(g, "curvature", sc.geometry.curvature, "geometry");
    read(g, "cap_radius", sc.geometry.cap_radius, "geometry");
  }
  sc.omega = parse_region(j.at("omega"), "omega");
  sc.omega0 = parse_region(j.at("omega0"), "omega0");
  read(j, "gamma", sc.gamma, "scenario");
  read(j, "s", sc.s, "scenario");
  read(j, "T", sc.T, "scenario");
  read(j, "mu", sc.mu, "scenario");
  read(j, "lambda_grid", sc.lambda_grid, "scenario");
  read(j, "seed", sc.seed, "scenario");
  read(j, "psi_samples", sc.psi_samples, "scenario");
  if (j.contains("audit")) {
    const json& a = j.at("audit");
    check_keys(a, "audit", {"n_near", "n_bulk", "n_core", "n_boundary", "directions", "rel_margin"});
    read(a, "n_near", sc.audit.n_near, "audit");
    read(a, "n_bulk", sc.audit.n_bulk, "audit");
    read(a, "n_core", sc.audit.n_core, "audit");
    read(a, "n_boundary", sc.audit.n_boundary, "audit");
    read(a, "directions", sc.audit.directions, "audit");
    read(a, "rel_margin", sc.audit.rel_margin, "audit");
  }
  if (j.contains("overrides")) {
    const json& o = j.at("overrides");
    check_keys(o, "overrides", {"delta", "r0", "C3", "C_lambda"});
    read_opt(o, "delta", sc.overrides.delta, "overrides");
    read_opt(o, "r0", sc.overrides.r0, "overrides");
    read_opt(o, "C3", sc.overrides.C3, "overrides");
    read_opt(o, "C_lambda", sc.overrides.C_lambda, "overrides");
  }
  if (j.contains("hardy")) {
    const json& h = j.at("hardy");
    check_keys(h, "hardy",
               {"interval_cells", "disk_radius", "disk_rings", "grading", "gamma", "c0_cells", "fields", "C2_cap",
                "phi_r1", "phi_samples"});
    auto& c = sc.hardy;
    read(h, "interval_cells", c.interval_cells, "hardy");
    read(h, "disk_radius", c.disk_radius, "hardy");
    read(h, "disk_rings", c.disk_rings, "hardy");
    read(h, "grading", c.grading, "hardy");
    read(h, "gamma", c.gamma, "hardy");
    read(h, "c0_cells", c.c0_cells, "hardy");
    read(h, "fields", c.fields, "hardy");
    read(h, "C2_cap", c.C2_cap, "hardy");
    read(h, "phi_r1", c.phi_r1, "hardy");
    read(h, "phi_samples", c.phi_samples, "hardy");
  }
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    check_keys(s, "simulate",
               {"cells", "rings", "grading", "dt", "steps", "scheme", "stride", "u0", "mu", "blowup"});
    auto& c = sc.simulate;
    read(s, "cells", c.cells, "simulate");
    read(s, "rings", c.rings, "simulate");
    read(s, "grading", c.grading, "simulate");
    read(s, "dt", c.dt, "simulate");
    read(s, "steps", c.steps, "simulate");
    read(s, "scheme", c.scheme, "simulate");
    read(s, "stride", c.stride, "simulate");
    read(s, "u0", c.u0, "simulate");
    read(s, "mu", c.mu, "simulate");
    if (s.contains("blowup")) {
      const json& b = s.at("blowup");
      check_keys(b, "simulate.blowup", {"mu", "levels", "base_cells", "t_probe", "dt"});
      read(b, "mu", c.blowup.mu, "simulate.blowup");
      read(b, "levels", c.blowup.levels, "simulate.blowup");
      read(b, "base_cells", c.blowup.base_cells, "simulate.blowup");
      read(b, "t_probe", c.blowup.t_probe, "simulate.blowup");
      read(b, "dt", c.blowup.dt, "simulate.blowup");
    }
  }
  if (j.contains("control")) {
    const json& s = j.at("control");
    check_keys(s, "control",
               {"cells", "rings", "grading", "T", "steps", "scheme", "epsilon", "cg_tol", "max_iter", "u0", "stride",
                "scan"});
    auto& c = sc.control;
    read(s, "cells", c.cells, "control");
    read(s, "rings", c.rings, "control");
    read(s, "grading", c.grading, "control");
    read(s, "T", c.T, "control");
    read(s, "steps", c.steps, "control");
    read(s, "scheme", c.scheme, "control");
    read(s, "epsilon", c.epsilon, "control");
    read(s, "cg_tol", c.cg_tol, "control");
    read(s, "max_iter", c.max_iter, "control");
    read(s, "u0", c.u0, "control");
    read(s, "stride", c.stride, "control");
    if (s.contains("scan")) {
      const json& q = s.at("scan");
      check_keys(q, "control.scan", {"parameter", "values"});
      read(q, "parameter", c.scan_parameter, "control.scan");
      read(q, "values", c.scan_values, "control.scan");
    }
  }
  if (j.contains("observability")) {
    const json& s = j.at("observability");
    check_keys(s, "observability", {"mu", "T"});
    read(s, "mu", sc.observability.mu, "observability");
    read(s, "T", sc.observability.T, "observability");
  }

  // value checks that do not need the geometry
  if (!(sc.gamma > 1 && sc.gamma < 2)) throw ConfigError("gamma must lie in (1,2)");
  if (!(sc.s > 0)) throw ConfigError("s must be positive");
  if (!(sc.T > 0)) throw ConfigError("T must be positive");
  if (sc.lambda_grid.empty()) throw ConfigError("lambda_grid is empty");
  if (!(sc.hardy.gamma >= 0 && sc.hardy.gamma < 2)) throw ConfigError("hardy.gamma must lie in [0,2)");
  parse_scheme(sc.simulate.scheme);
  parse_scheme(sc.control.scheme);
  if (sc.control.scan_parameter != "mu" && sc.control.scan_parameter != "T")
    throw ConfigError("control.scan.parameter must be 'mu' or 'T'");
  for (const auto* u : {&sc.simulate.u0, &sc.control.u0})
    if (*u != "smooth" && *u != "bump") throw ConfigError("u0 must be 'smooth' or 'bump'");
  for (double e : sc.control.epsilon)
    if (!(e > 0)) throw ConfigError("control.epsilon values must be positive");
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_scenario(j);
}

json scenario_to_json(const Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["geometry"] = {{"kind", sc.geometry.kind},
                   {"length", sc.geometry.length},
                   {"radius", sc.geometry.radius},
                   {"curvature", sc.geometry.curvature},
                   {"cap_radius", sc.geometry.cap_radius}};
  j["omega"] = region_json(sc.omega);
  j["omega0"] = region_json(sc.omega0);
  j["gamma"] = sc.gamma;
  j["s"] = sc.s;
  j["T"] = sc.T;
  j["mu"] = sc.mu;
  j["lambda_grid"] = sc.lambda_grid;
  j["seed"] = sc.seed;
  j["psi_samples"] = sc.psi_samples;
  j["audit"] = {{"n_near", sc.audit.n_near},         {"n_bulk", sc.audit.n_bulk},
                {"n_core", sc.audit.n_core},         {"n_boundary", sc.audit.n_boundary},
                {"directions", sc.audit.directions}, {"rel_margin", sc.audit.rel_margin}};
  json o = json::object();
  auto put = [&](const char* k, const std::optional<double>& v) { o[k] = v ? json(*v) : json(nullptr); };
  put("delta", sc.overrides.delta);
  put("r0", sc.overrides.r0);
  put("C3", sc.overrides.C3);
  put("C_lambda", sc.overrides.C_lambda);
  j["overrides"] = o;
  const auto& h = sc.hardy;
  j["hardy"] = {{"interval_cells", h.interval_cells}, {"disk_radius", h.disk_radius}, {"disk_rings", h.disk_rings},
                {"grading", h.grading},               {"gamma", h.gamma},             {"c0_cells", h.c0_cells},
                {"fields", h.fields},                 {"C2_cap", h.C2_cap},           {"phi_r1", h.phi_r1},
                {"phi_samples", h.phi_samples}};
  const auto& s = sc.simulate;
  j["simulate"] = {{"cells", s.cells},
                   {"rings", s.rings},
                   {"grading", s.grading},
                   {"dt", s.dt},
                   {"steps", s.steps},
                   {"scheme", s.scheme},
                   {"stride", s.stride},
                   {"u0", s.u0},
                   {"mu", s.mu},
                   {"blowup",
                    {{"mu", s.blowup.mu},
                     {"levels", s.blowup.levels},
                     {"base_cells", s.blowup.base_cells},
                     {"t_probe", s.blowup.t_probe},
                     {"dt", s.blowup.dt}}}};
  const auto& c = sc.control;
  j["control"] = {{"cells", c.cells},
                  {"rings", c.rings},
                  {"grading", c.grading},
                  {"T", c.T},
                  {"steps", c.steps},
                  {"scheme", c.scheme},
                  {"epsilon", c.epsilon},
                  {"cg_tol", c.cg_tol},
                  {"max_iter", c.max_iter},
                  {"u0", c.u0},
                  {"stride", c.stride},
                  {"scan", {{"parameter", c.scan_parameter}, {"values", c.scan_values}}}};
  j["observability"] = {{"mu", sc.observability.mu}, {"T", sc.observability.T}};
  return j;
}

Grid scenario_grid(const Scenario& sc, int cells, int rings, double grading) {
  if (sc.geometry.kind == "interval") return interval_grid(sc.geometry.length, cells);
  if (sc.geometry.kind == "tangent_disk") return disk_ring_grid(sc.geometry.radius, rings, true, grading);
  throw ConfigError("meshing is available for the interval and the tangent disk only");
}

VecX initial_field(const Scenario& sc, const Grid& g, const std::string& kind) {
  VecX u(static_cast<Eigen::Index>(g.size()));
  const double L = sc.geometry.length, R = sc.geometry.radius;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec& x = g.nodes[i];
    double v = 0;
    if (kind == "smooth") {
      v = g.dim == 1 ? std::sin(M_PI * x(0) / L) : 1 - (x - Vec(0, R)).squaredNorm() / (R * R);
    } else {
      const double a = 0.25 * (g.dim == 1 ? L : R);
      const double r = x.norm();
      v = r < a ? (a * a - r * r) * (a * a - r * r) : 0.0;
    }
    u(static_cast<Eigen::Index>(i)) = v;
  }
  return to_scaled(g, u);
}

void write_header(std::ostream& os, const std::vector<HeaderRow>& rows) {
  os << "# key,value,binding\n";
  for (const auto& r : rows) os << "# " << r[0] << ',' << r[1] << ',' << sanitize(r[2]) << '\n';
}

WeightSetup prepare_weights(const Scenario& sc, const RunOptions& opt) {
  WeightSetup ws;
  const std::uint64_t seed = effective_seed(sc, opt);
  ws.geometry = sc.geometry.build();
  ws.regions = make_regions(ws.geometry, sc.omega, sc.omega0);
  try {
    PsiBuildOptions po;
    po.samples = sc.psi_samples;
    po.seed = seed;
    if (sc.overrides.delta) po.delta_override = *sc.overrides.delta;
    ws.kit = build_psi(ws.geometry, ws.regions, po);

    if (sc.overrides.C3) {
      ws.C3 = *sc.overrides.C3;
      ws.C3_binding = "override";
    } else {
      const Grid g = scenario_grid(sc, 256, 16, 1.0);
      ws.C3 = fit_two_constants(g, sc.gamma, sc.mu).C3;
      ws.C3_binding = "two_constant_sweep";
    }
    ws.r0 = choose_r0(r0_inputs(ws.kit, sc.gamma, sc.mu, ws.C3));
    if (sc.overrides.r0) {
      ws.r0.value = *sc.overrides.r0;
      ws.r0.binding = "override";
    }
    ws.regions.r0 = ws.r0.value;
    ws.built = true;

    const AuditContext ctx{ws.geometry, ws.regions, ws.kit, sc.gamma, sc.s, sc.T};
    AuditOptions ao = sc.audit;
    ao.seed = seed;
    ao.workers = opt.workers;
    if (opt.strict) ao.rel_margin = std::max(ao.rel_margin, 1e-12);
    if (sc.overrides.C_lambda) ao.C_lambda_override = *sc.overrides.C_lambda;
    try {
      Lambda0Result res = find_lambda0(ctx, sc.lambda_grid, ao);
      ws.lambda0_found = true;
      ws.report = res.report;
      ws.tried = res.tried;
    } catch (const LambdaExhausted& e) {
      ws.report = e.report;
      ws.tried = e.tried;
      ws.failure = e.what();
    }
    ws.audited = true;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    ws.failure = e.what();
  }

  auto& h = ws.header;
  const std::string na = "unavailable";
  if (ws.built) {
    h.push_back({"delta", fmt(ws.kit.delta), ws.kit.delta_overridden ? "override" : ws.kit.delta_choice.binding});
    h.push_back({"delta0", fmt(ws.kit.delta0), "gradient_min_outside_core"});
    h.push_back({"r0", fmt(ws.r0.value), ws.r0.binding});
  } else {
    h.push_back({"delta", na, ws.failure});
    h.push_back({"delta0", na, ws.failure});
    h.push_back({"r0", na, ws.failure});
  }
  if (ws.audited)
    h.push_back({"C_lambda", ws.report.C_lambda.str(), sc.overrides.C_lambda ? "override" : "sampled_sup"});
  else
    h.push_back({"C_lambda", na, ws.failure});
  h.push_back({"C_Omega", fmt(ws.geometry.tangency_constant()), "boundary_sup"});
  h.push_back({"E_Omega", fmt(ws.geometry.projection_growth_constant()), "collar_sup"});
  if (ws.built) {
    h.push_back({"D_Omega_psi1", fmt(ws.kit.D), "euler_defect_sup"});
    h.push_back({"C3", fmt(ws.C3), ws.C3_binding});
  } else {
    h.push_back({"D_Omega_psi1", na, ws.failure});
    h.push_back({"C3", na, ws.failure});
  }
  if (ws.lambda0_found)
    h.push_back({"lambda0", fmt(ws.report.lambda), "audit_grid"});
  else
    h.push_back({"lambda0", "none", ws.failure.empty() ? "not_run" : ws.failure});
  return ws;
}

namespace {

// ---------------------------------------------------------------- commands

using Rows = std::vector<SummaryRow>;

// at mu = N^2/4 the energy space is larger than H^1_0, which nodal elements cannot see
void note_regime(Rows& rows, const std::string& where, int dim, double mu) {
  const double mu_N = dim * dim / 4.0;
  if (std::fabs(mu - mu_N) <= 1e-12 * mu_N) rows.push_back({"regime_" + where + "_mu_" + fmt(mu), "formal", "info"});
}

int run_audit(const Scenario& sc, const WeightSetup& ws, const Outputs& out, Rows& rows, std::ostream& log) {
  if (!ws.audited) {
    log << "audit-weights: weight construction failed: " << ws.failure << '\n';
    rows.push_back({"audit_weights", ws.failure, "fail"});
    return 1;
  }
  {
    auto os = out.open("audit.csv");
    write_audit_csv(os, ws.report, ws.geometry.dim());
  }
  {
    auto os = out.open("lambda_scan.csv");
    os << "lambda,pass,n_samples,max_identity_residual,first_failure\n";
    const std::vector<AuditReport> reps = ws.tried.empty() ? std::vector<AuditReport>{ws.report} : ws.tried;
    for (const auto& r : reps)
      os << fmt(r.lambda) << ',' << (r.pass ? 1 : 0) << ',' << r.n_samples << ',' << fmt(r.max_identity_residual)
         << ',' << sanitize(r.first_failure()) << '\n';
  }
  rows.push_back({"audit_samples", std::to_string(ws.report.n_samples), "info"});
  rows.push_back({"audit_identity_residual", fmt(ws.report.max_identity_residual),
                  status(ws.report.max_identity_residual <= 1e-9)});
  if (ws.lambda0_found) {
    rows.push_back({"lambda0", fmt(ws.report.lambda), "pass"});
    log << "audit-weights: lambda0 = " << fmt(ws.report.lambda) << ", " << ws.report.n_samples << " samples\n";
    return 0;
  }
  rows.push_back({"lambda0", ws.report.first_failure(), "fail"});
  log << "audit-weights: " << ws.failure << '\n';
  (void)sc;
  return 1;
}

int run_hardy(const Scenario& sc, const RunOptions& opt, const Outputs& out, Rows& rows, std::ostream& log) {
  const auto& hc = sc.hardy;
  const std::uint64_t seed = effective_seed(sc, opt);
  std::vector<HardyRow> hrows;
  bool ok = true;

  std::vector<Grid> g1;
  for (int c : hc.interval_cells) g1.push_back(interval_grid(1, c));
  HardyReport b1 = hardy_study(g1, Placement::boundary, 0, opt.workers);
  append_rows(hrows, "boundary_N1", b1);
  hrows.push_back({"boundary_N1_fit", 1, 2, 0, b1.fit_intercept, std::nan("")});
  const double fin1 = b1.levels.back().constant;
  const bool ok1 = b1.monotone && b1.residuals_ok && b1.dominates && b1.positive_ground_state;
  rows.push_back({"hardy_boundary_N1_finest", fmt(fin1), status(ok1 && fin1 >= 0.25 && fin1 <= 0.40)});
  ok = ok && ok1 && fin1 >= 0.25 && fin1 <= 0.40;

  std::vector<Grid> gb, gi;
  for (int r : hc.disk_rings) {
    gb.push_back(disk_ring_grid(hc.disk_radius, r, true, hc.grading));
    gi.push_back(disk_ring_grid(hc.disk_radius, r, false, hc.grading));
  }
  if (!gb.empty()) {
    HardyReport b2 = hardy_study(gb, Placement::boundary, 0, opt.workers);
    HardyReport i2 = hardy_study(gi, Placement::interior, 0, opt.workers);
    append_rows(hrows, "boundary_N2", b2);
    append_rows(hrows, "interior_N2", i2);
    const double mb = b2.levels.back().constant, mi = i2.levels.back().constant;
    hrows.push_back({"gap_N2", 2, 2, gb.back().h, mb - mi,
                     std::max(b2.levels.back().residual, i2.levels.back().residual)});
    const bool gap_ok = mb - mi >= 0.35 && mb > 0.5 && mi < 0.15;
    const bool ok2 = b2.residuals_ok && i2.residuals_ok && b2.monotone && i2.monotone && b2.positive_ground_state &&
                     i2.positive_ground_state;
    rows.push_back({"hardy_boundary_N2_finest", fmt(mb), status(ok2)});
    rows.push_back({"hardy_interior_N2_finest", fmt(mi), status(ok2)});
    rows.push_back({"hardy_gap_N2", fmt(mb - mi), status(gap_ok)});
    ok = ok && ok2 && gap_ok;
  }

  // shift, inequalities and the two-constant pair on the unit interval
  const Grid g = interval_grid(1, hc.c0_cells);
  const double muN = 0.25;
  const C0Result c0 = estimate_C0_gamma(g, hc.gamma, muN);
  hrows.push_back({"C0_gamma", 1, hc.gamma, g.h, c0.value, c0.nu - 1});
  const TwoConstantFit fit = fit_two_constants(g, hc.gamma, muN, hc.C2_cap);
  hrows.push_back({"C2", 1, hc.gamma, g.h, fit.C2, std::nan("")});
  hrows.push_back({"C3", 1, hc.gamma, g.h, fit.C3, std::nan("")});
  rows.push_back({"C0_gamma", fmt(c0.value), "info"});

  const HardyForms forms(g, hc.gamma);
  InequalityConstants ic;
  ic.gamma = hc.gamma;
  ic.mu_N = muN;
  ic.C0 = c0.value;
  ic.C1 = c0.value + 1e-3;
  ic.C2 = fit.C2;
  ic.C3 = fit.C3;
  std::vector<std::pair<std::string, InequalityReport>> ineq;
  ic.mu = muN;
  ineq.emplace_back("critical", check_inequality(forms, InequalityId::hardy_c1, ic, hc.fields, seed));
  ineq.emplace_back("critical", check_inequality(forms, InequalityId::two_constant, ic, hc.fields, seed + 1));
  for (double mu : {muN, std::min(sc.mu, muN), -muN}) {
    ic.mu = mu;
    ineq.emplace_back(fmt(mu), check_inequality(forms, InequalityId::norm_equivalence, ic, hc.fields, seed + 2));
  }
  {
    auto os = out.open("inequalities.csv");
    os << "inequality,mu,fields,violations,worst_margin,worst_seed\n";
    for (const auto& [mu, r] : ineq) {
      os << to_string(r.id) << ',' << mu << ',' << r.fields << ',' << r.violations << ',' << fmt(r.worst_margin) << ','
         << r.worst_seed << '\n';
      ok = ok && r.pass();
      rows.push_back({"inequality_" + to_string(r.id) + "_mu_" + mu, std::to_string(r.violations), status(r.pass())});
    }
  }

  {
    auto os = out.open("phi.csv");
    os << "N,rho_factor,r,margin,remainder,h_fd,retried\n";
    for (const Geometry& geo : {Geometry::interval(1), Geometry::tangent_disk(hc.disk_radius)}) {
      for (bool suppress : {false, true}) {
        PhiOptions po;
        po.r1 = hc.phi_r1;
        po.samples = hc.phi_samples;
        po.suppress_rho = suppress;
        const PhiCheck pc = appendix_phi_check(geo, po);
        for (const auto& s : pc.samples)
          os << pc.N << ',' << (suppress ? "suppressed" : "distance") << ',' << fmt(s.r) << ',' << fmt(s.margin) << ','
             << fmt(s.remainder) << ',' << fmt(s.h_fd) << ',' << (s.retried ? 1 : 0) << '\n';
        const std::string item = "phi_N" + std::to_string(pc.N) + (suppress ? "_suppressed" : "");
        if (suppress) {
          rows.push_back({item, std::to_string(pc.failures) + " failures", "reported"});
        } else {
          rows.push_back({item, fmt(pc.fitted_constant), status(pc.pass())});
          ok = ok && pc.pass();
        }
      }
    }
  }
  {
    auto os = out.open("hardy.csv");
    write_hardy_csv(os, hrows);
  }
  log << "hardy: " << (ok ? "all checks pass" : "some checks fail") << '\n';
  return ok ? 0 : 1;
}

int run_simulate(const Scenario& sc, const RunOptions& opt, const Outputs& out, Rows& rows, std::ostream& log) {
  const auto& c = sc.simulate;
  const Scheme scheme = parse_scheme(c.scheme);
  const Grid g = scenario_grid(sc, c.cells, c.rings, c.grading);
  check_time_step(g, c.dt, scheme);
  const VecX v0 = initial_field(sc, g, c.u0);
  bool ok = true;
  auto eos = out.open("energy.csv");
  eos << "mu,lambda_min,c,monotone,worst_ratio,integrated_lhs,integrated_rhs,pass\n";
  for (double mu : c.mu) {
    const SpMat A = assemble(g, mu, 0);
    const Propagator P(A, c.dt, scheme);
    const Trajectory tr = solve_forward(P, v0, c.steps, {}, c.stride);
    {
      auto os = out.open("trajectory_mu" + fmt(mu) + ".csv");
      write_trajectory_csv(os, g, tr, 1);
    }
    const Trajectory adj = solve_adjoint(P, v0, c.steps);
    const double lmin = smallest_eigenvalue(A);
    const double rate = growth_rate(P, lmin);
    const EnergyCheck ec = energy_monotonicity_check(adj, rate, c.steps * c.dt);
    eos << fmt(mu) << ',' << fmt(lmin) << ',' << fmt(rate) << ',' << (ec.monotone ? 1 : 0) << ','
        << fmt(ec.worst_ratio) << ',' << fmt(ec.integrated_lhs) << ',' << fmt(ec.integrated_rhs) << ','
        << (ec.pass() ? 1 : 0) << '\n';
    note_regime(rows, "simulate", g.dim, mu);
    rows.push_back({"energy_mu_" + fmt(mu), fmt(ec.worst_ratio), status(ec.pass())});
    rows.push_back({"terminal_norm_mu_" + fmt(mu), fmt(tr.v.back().norm()), "info"});
    ok = ok && ec.pass();
  }
  BlowupOptions bo;
  bo.length = sc.geometry.kind == "interval" ? sc.geometry.length : 1.0;
  bo.base_cells = c.blowup.base_cells;
  bo.levels = c.blowup.levels;
  bo.t_probe = c.blowup.t_probe;
  bo.dt = c.blowup.dt;
  bo.support = 0.25 * bo.length;
  for (double mu : c.blowup.mu) {
    const DichotomyReport rep = blowup_experiment(mu, bo, opt.workers);
    auto os = out.open("dichotomy_mu" + fmt(mu) + ".csv");
    write_dichotomy_csv(os, rep);
    rows.push_back({"dichotomy_mu_" + fmt(mu), rep.classification, "reported"});
    log << "simulate: mu = " << fmt(mu) << " -> " << rep.classification << '\n';
  }
  return ok ? 0 : 1;
}

int run_control(const Scenario& sc, const RunOptions& opt, const Outputs& out, Rows& rows, std::ostream& log) {
  const auto& c = sc.control;
  const Grid g = scenario_grid(sc, c.cells, c.rings, c.grading);
  const VecX v0 = initial_field(sc, g, c.u0);
  ControlSetup cs;
  cs.mu = sc.mu;
  cs.T = c.T;
  cs.steps = c.steps;
  cs.scheme = parse_scheme(c.scheme);
  const HumSolver hs(g, sc.omega, cs);
  note_regime(rows, "control", g.dim, cs.mu);
  const double sym = gramian_symmetry_residual(hs, 3, effective_seed(sc, opt));
  bool ok = sym < 1e-10;
  rows.push_back({"gramian_symmetry", fmt(sym), status(sym < 1e-10)});

  std::vector<double> eps = c.epsilon;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  std::vector<std::pair<ControlSetup, ControlResult>> runs;
  for (double e : eps) {
    runs.emplace_back(cs, hum_control(hs, v0, e, c.cg_tol, c.max_iter));
    const ControlResult& r = runs.back().second;
    rows.push_back({"terminal_ratio_eps_" + fmt(e), fmt(r.terminal_norm / r.free_terminal_norm),
                    status(r.terminal_audit_ok)});
    ok = ok && r.terminal_audit_ok;
  }
  bool monotone = true;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (!(runs[i].second.terminal_norm < runs[i - 1].second.terminal_norm)) monotone = false;
  rows.push_back({"epsilon_monotone", monotone ? "strict" : "broken", status(monotone)});
  ok = ok && monotone;
  {
    auto os = out.open("control.csv");
    write_control_csv(os, runs);
  }
  if (!runs.empty()) {
    const ControlResult& r = runs.back().second;
    Trajectory tr;
    for (std::size_t m = 0; m < r.control.size(); ++m) {
      tr.t.push_back(static_cast<double>(m) * hs.dt());
      tr.v.push_back(r.control[m]);
    }
    auto os = out.open("control_field.csv");
    write_trajectory_csv(os, g, tr, c.stride);
  }
  if (!c.scan_values.empty()) {
    ScanSetup ss;
    ss.base = cs;
    ss.dt = c.T / c.steps;
    ss.epsilon = eps.empty() ? 1e-6 : eps.back();
    ss.cg_tol = c.cg_tol;
    ss.max_iter = c.max_iter;
    const ScanParameter p = c.scan_parameter == "mu" ? ScanParameter::mu : ScanParameter::T;
    const auto scan = cost_scan(g, sc.omega, v0, p, c.scan_values, ss, opt.workers);
    auto os = out.open("scan.csv");
    write_scan_csv(os, p, scan);
    for (const auto& r : scan) {
      note_regime(rows, "scan", g.dim, p == ScanParameter::mu ? r.value : sc.mu);
      if (!r.error.empty()) rows.push_back({"scan_" + c.scan_parameter + "_" + fmt(r.value), r.error, "fail"});
    }
  }
  log << "control: " << (ok ? "pass" : "fail") << '\n';
  return ok ? 0 : 1;
}

int run_observability(const Scenario& sc, const RunOptions& opt, const Outputs& out, Rows& rows, std::ostream& log) {
  const auto& c = sc.control;
  const Grid g = scenario_grid(sc, c.cells, c.rings, c.grading);
  const double dt = c.T / c.steps;
  bool ok = true;
  auto os = out.open("observability.csv");
  os << "parameter,mu,T,C_T,residual,iterations,error\n";
  auto one = [&](const std::string& param, double mu, double T) {
    std::string err;
    ObservabilityResult r;
    try {
      ControlSetup cs;
      cs.mu = mu;
      cs.T = T;
      cs.steps = std::max(1, static_cast<int>(std::llround(T / dt)));
      cs.scheme = parse_scheme(c.scheme);
      const HumSolver hs(g, sc.omega, cs);
      r = observability_constant(hs, 1e-12, opt.workers);
    } catch (const std::exception& e) {
      err = sanitize(e.what());
      ok = false;
    }
    os << param << ',' << fmt(mu) << ',' << fmt(T) << ',' << fmt(r.value) << ',' << fmt(r.residual) << ','
       << r.iterations << ',' << err << '\n';
    note_regime(rows, "observability", g.dim, mu);
    rows.push_back({"C_T_" + param + "_sweep_mu_" + fmt(mu) + "_T_" + fmt(T), err.empty() ? fmt(r.value) : err,
                    err.empty() ? "info" : "fail"});
  };
  for (double mu : sc.observability.mu) one("mu", mu, c.T);
  for (double T : sc.observability.T) one("T", sc.mu, T);
  log << "observability: " << (ok ? "done" : "some rows failed") << '\n';
  return ok ? 0 : 1;
}

int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

using Runner = std::function<int(const Scenario&, const RunOptions&, const WeightSetup&, const Outputs&, Rows&,
                                  std::ostream&)>;

int standalone(const Scenario& sc, const RunOptions& opt, std::ostream& log, const Runner& run) {
  return guarded(log, [&]() {
    const WeightSetup ws = prepare_weights(sc, opt);
    Outputs out{opt.out_dir, &ws.header};
    Rows rows;
    int code = 0;
    try {
      code = run(sc, opt, ws, out, rows, log);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      rows.push_back({"error", e.what(), "fail"});
      log << "error: " << e.what() << '\n';
      code = 1;
    }
    write_summary(out, rows);
    json eff = scenario_to_json(sc);
    eff["seed"] = effective_seed(sc, opt);
    json consts = json::array();
    for (const auto& h : ws.header) consts.push_back({h[0], h[1], h[2]});
    eff["effective_constants"] = consts;
    std::filesystem::create_directories(out.dir);
    std::ofstream(out.dir / "effective_config.json", std::ios::binary | std::ios::trunc) << eff.dump(2) << '\n';
    return code;
  });
}

} // namespace

int cmd_audit(const Scenario& sc, const RunOptions& opt, std::ostream& log) {
  return standalone(sc, opt, log, [](const Scenario& s, const RunOptions&, const WeightSetup& ws, const Outputs& out,
                                     Rows& rows, std::ostream& lg) { return run_audit(s, ws, out, rows, lg); });
}

int cmd_hardy(const Scenario& sc, const RunOptions& opt, std::ostream& log) {
  return standalone(sc, opt, log, [](const Scenario& s, const RunOptions& o, const WeightSetup&, const Outputs& out,
                                     Rows& rows, std::ostream& lg) { return run_hardy(s, o, out, rows, lg); });
}

int cmd_simulate(const Scenario& sc, const RunOptions& opt, std::ostream& log) {
  return standalone(sc, opt, log, [](const Scenario& s, const RunOptions& o, const WeightSetup&, const Outputs& out,
                                     Rows& rows, std::ostream& lg) { return run_simulate(s, o, out, rows, lg); });
}

int cmd_control(const Scenario& sc, const RunOptions& opt, std::ostream& log) {
  return standalone(sc, opt, log, [](const Scenario& s, const RunOptions& o, const WeightSetup&, const Outputs& out,
                                     Rows& rows, std::ostream& lg) { return run_control(s, o, out, rows, lg); });
}

int cmd_observability(const Scenario& sc, const RunOptions& opt, std::ostream& log) {
  return standalone(sc, opt, log, [](const Scenario& s, const RunOptions& o, const WeightSetup&, const Outputs& out,
                                     Rows& rows, std::ostream& lg) { return run_observability(s, o, out, rows, lg); });
}

int cmd_report(const Scenario& sc, const RunOptions& opt, std::ostream& log) {
  return standalone(sc, opt, log,
                    [](const Scenario& s, const RunOptions& o, const WeightSetup& ws, const Outputs& out, Rows& rows,
                       std::ostream& lg) {
                      int code = 0;
                      auto step = [&](const char* name, const std::function<int()>& f) {
                        int c = 0;
                        try {
                          c = f();
                        } catch (const ConfigError&) {
                          throw;
                        } catch (const std::exception& e) {
                          rows.push_back({std::string(name) + "_error", e.what(), "fail"});
                          lg << name << ": " << e.what() << '\n';
                          c = 1;
                        }
                        code = std::max(code, c);
                      };
                      step("audit", [&] { return run_audit(s, ws, out, rows, lg); });
                      step("hardy", [&] { return run_hardy(s, o, out, rows, lg); });
                      step("simulate", [&] { return run_simulate(s, o, out, rows, lg); });
                      step("control", [&] { return run_control(s, o, out, rows, lg); });
                      step("observability", [&] { return run_observability(s, o, out, rows, lg); });
                      return code;
                    });
}

int run_command(const std::string& name, const std::string& config_path, const RunOptions& opt, std::ostream& log) {
  return guarded(log, [&]() {
    const Scenario sc = load_scenario(config_path);
    if (name == "audit-weights") return cmd_audit(sc, opt, log);
    if (name == "hardy") return cmd_hardy(sc, opt, log);
    if (name == "simulate") return cmd_simulate(sc, opt, log);
    if (name == "control") return cmd_control(sc, opt, log);
    if (name == "observability") return cmd_observability(sc, opt, log);
    if (name == "report") return cmd_report(sc, opt, log);
    throw ConfigError("unknown subcommand '" + name + "'");
  });
}

} // namespace singheat
