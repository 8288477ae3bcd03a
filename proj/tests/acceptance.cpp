// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "singheat/cli.hpp"
#include "weights_oracles.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace singheat;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = SINGHEAT_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 1
Outcome hardy_gap() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Grid> g1;
  for (int c : {100, 200, 400, 800, 1600}) g1.push_back(interval_grid(1, c));
  const HardyReport b1 = hardy_study(g1, Placement::boundary);
  bool decreasing = true;
  for (std::size_t i = 1; i < b1.levels.size(); ++i)
    decreasing = decreasing && b1.levels[i].constant < b1.levels[i - 1].constant;
  const double fin1 = b1.levels.back().constant;
  const bool n1 = decreasing && fin1 >= 0.25 && fin1 <= 0.40 && b1.levels.back().h == 1.0 / 1600;

  std::vector<Grid> gb, gi;
  for (int r : {32, 64, 128}) {
    gb.push_back(disk_ring_grid(1, r, true, 2));
    gi.push_back(disk_ring_grid(1, r, false, 2));
  }
  const std::size_t nodes = std::max(gb.back().size(), gi.back().size());
  const HardyReport b2 = hardy_study(gb, Placement::boundary);
  const HardyReport i2 = hardy_study(gi, Placement::interior);
  const double mb = b2.levels.back().constant, mi = i2.levels.back().constant;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool n2 = mb - mi >= 0.35 && mb > 0.5 && mi < 0.15 && nodes <= 50000;
  std::ostringstream d;
  d << "N1 finest " << fmt(fin1) << (decreasing ? " decreasing" : " not decreasing") << "; N2 boundary " << fmt(mb)
    << " interior " << fmt(mi) << " gap " << fmt(mb - mi) << " at " << nodes << " nodes; " << fmt(secs) << " s";
  return {n1 && n2 && secs <= 120, d.str()};
}

// 2
Outcome disk_audit() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = load_scenario((kSource / "scenarios" / "tangent_disk.json").string());
  RunOptions opt;
  opt.workers = default_workers();
  const WeightSetup ws = prepare_weights(sc, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t violations = 0;
  for (const auto& c : ws.report.checks) violations += c.violations;
  const bool in_grid = std::find(sc.lambda_grid.begin(), sc.lambda_grid.end(), ws.report.lambda) != sc.lambda_grid.end();
  std::ostringstream d;
  d << "lambda0 " << (ws.lambda0_found ? fmt(ws.report.lambda) : "none") << ", " << ws.report.checks.size()
    << " checks, " << violations << " violations, " << ws.report.n_samples << " samples, identity "
    << fmt(ws.report.max_identity_residual) << "; " << fmt(secs) << " s";
  const bool ok = ws.lambda0_found && in_grid && violations == 0 && ws.report.n_samples >= 10000 &&
                  ws.report.max_identity_residual <= 1e-9 && ws.report.find("boundary_sign") && secs <= 60;
  return {ok, d.str()};
}

// 3
Outcome derivatives_and_recipes() {
  const oracle::SweepResult disk = oracle::derivative_sweep(oracle::disk_setup(1), 21);
  const oracle::SweepResult line = oracle::derivative_sweep(oracle::interval_setup(1), 22, {0.6, 0.7, 0.85});
  const int md = oracle::delta_recipe_mismatches(4, 1000);
  const int mr = oracle::r0_recipe_mismatches(5, 1000);
  const double worst = std::max(disk.worst(), line.worst());
  std::ostringstream d;
  d << "worst FD relative error " << fmt(worst) << " over " << disk.checked + line.checked
    << " points; recipe mismatches delta " << md << " r0 " << mr;
  return {worst < 1e-6 && disk.checked == 1000 && line.checked == 1000 && md == 0 && mr == 0, d.str()};
}

// 4
Outcome dichotomy() {
  const auto t0 = std::chrono::steady_clock::now();
  BlowupOptions bo;
  bo.levels = 4;
  bo.t_probe = 0.05;
  const int workers = default_workers();
  const DichotomyReport sub = blowup_experiment(0.2, bo, workers);
  const DichotomyReport sup = blowup_experiment(0.35, bo, workers);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto ratios = [](const DichotomyReport& r) {
    std::string s;
    for (std::size_t i = 1; i < r.rows.size(); ++i) s += (i > 1 ? " " : "") + fmt(r.rows[i].ratio);
    return s;
  };
  std::ostringstream d;
  d << "mu 0.2 " << sub.classification << " [" << ratios(sub) << "]; mu 0.35 " << sup.classification << " ["
    << ratios(sup) << "]; " << fmt(secs) << " s";
  const bool ok = sub.classification == "stable" && sup.classification == "blow-up trend" && sub.rows.size() == 4 &&
                  sup.rows.size() == 4 && secs <= 60;
  return {ok, d.str()};
}

// 5
Outcome hum() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario sc = load_scenario((kSource / "scenarios" / "interval.json").string());
  const Grid g = interval_grid(1, 256);
  ControlSetup cs;
  cs.mu = 0.2;
  cs.T = 0.5;
  cs.steps = sc.control.steps;
  const HumSolver hs(g, Region::make_interval(0.6, 0.8), cs);
  const VecX v0 = initial_field(sc, g, sc.control.u0);
  const double sym = gramian_symmetry_residual(hs, 3, 1);
  std::vector<double> ratio;
  bool audits = true;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const ControlResult r = hum_control(hs, v0, eps, sc.control.cg_tol, sc.control.max_iter);
    ratio.push_back(r.terminal_norm / r.free_terminal_norm);
    audits = audits && r.terminal_audit_ok;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool monotone = ratio[0] > ratio[1] && ratio[1] > ratio[2];
  std::ostringstream d;
  d << "ratios " << fmt(ratio[0]) << " " << fmt(ratio[1]) << " " << fmt(ratio[2]) << ", symmetry " << fmt(sym)
    << "; " << fmt(secs) << " s";
  return {ratio[2] < 1e-2 && monotone && sym < 1e-10 && audits && secs <= 120, d.str()};
}

// 6
Outcome energy() {
  int runs = 0, failed = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const char* name : {"interval", "tangent_disk"}) {
    const Scenario sc = load_scenario((kSource / "scenarios" / (std::string(name) + ".json")).string());
    const auto& c = sc.simulate;
    const Grid g = scenario_grid(sc, c.cells, c.rings, c.grading);
    for (const char* kind : {"smooth", "bump"}) {
      const VecX wT = initial_field(sc, g, kind);
      for (Scheme scheme : {Scheme::implicit_euler, Scheme::crank_nicolson}) {
        for (double mu : c.mu) {
          const SpMat A = assemble(g, mu, 0);
          const Propagator P(A, c.dt, scheme);
          const Trajectory adj = solve_adjoint(P, wT, c.steps);
          const EnergyCheck ec = energy_monotonicity_check(adj, growth_rate(P, smallest_eigenvalue(A)), c.steps * c.dt);
          ++runs;
          if (!ec.pass()) ++failed;
          worst = std::min(worst, ec.worst_ratio);
        }
      }
    }
  }
  std::ostringstream d;
  d << runs << " adjoint runs, " << failed << " failed, worst weighted step ratio " << fmt(worst);
  return {failed == 0 && runs > 0, d.str()};
}

// 7
Outcome supersolution() {
  PhiOptions po;
  po.samples = 200;
  const PhiCheck one = appendix_phi_check(Geometry::interval(1), po);
  const PhiCheck two = appendix_phi_check(Geometry::tangent_disk(2), po);
  std::ostringstream d;
  d << "N1 failures " << one.failures << " constant " << fmt(one.fitted_constant) << "; N2 failures " << two.failures
    << " constant " << fmt(two.fitted_constant);
  return {one.pass() && two.pass() && one.samples.size() == 200 && two.samples.size() == 200, d.str()};
}

// 8
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "singheat_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  json tiny = json::parse(slurp(kSource / "scenarios" / "interval.json"));
  tiny["name"] = "interval_small";
  tiny["hardy"] = json::parse(R"({"interval_cells": [50, 100], "disk_rings": [8, 16], "c0_cells": 64,
                                   "fields": 50, "phi_samples": 50})");
  tiny["simulate"] = json::parse(R"({"cells": 64, "dt": 1e-3, "steps": 20, "u0": "bump", "mu": [0, 0.2],
                                      "blowup": {"mu": [0.2, 0.35], "levels": 2, "base_cells": 256, "dt": 1e-4}})");
  tiny["control"] = json::parse(R"({"cells": 48, "T": 0.2, "steps": 40, "epsilon": [1e-2, 1e-4],
                                     "scan": {"parameter": "mu", "values": [0, 0.2]}})");
  tiny["observability"] = json::parse(R"({"mu": [0, 0.2], "T": [0.1, 0.2]})");
  const fs::path cfg = root / "interval_small.json";
  std::ofstream(cfg) << tiny.dump(2);

  struct Run {
    std::string command;
    fs::path config;
  };
  const std::vector<Run> plan{{"report", cfg}, {"audit-weights", kSource / "scenarios" / "tangent_disk.json"}};
  std::size_t files = 0, differing = 0;
  std::ostringstream log;
  for (const auto& run : plan) {
    std::vector<fs::path> dirs;
    for (int workers : {1, 4}) {
      RunOptions opt;
      opt.workers = workers;
      opt.out_dir = (root / (run.command + "_w" + std::to_string(workers))).string();
      run_command(run.command, run.config.string(), opt, log);
      dirs.emplace_back(opt.out_dir);
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      const fs::path other = dirs[1] / e.path().filename();
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
    }
  }
  std::ostringstream d;
  d << files << " CSV files compared across worker counts, " << differing << " differ";
  return {files > 0 && differing == 0, d.str()};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"hardy_constant_gap", hardy_gap},
      {"carleman_audit_tangent_disk", disk_audit},
      {"derivatives_and_recipes", derivatives_and_recipes},
      {"blowup_dichotomy", dichotomy},
      {"hum_null_control", hum},
      {"adjoint_energy", energy},
      {"supersolution_margins", supersolution},
      {"csv_determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
