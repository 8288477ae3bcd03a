#pragma once

#include "singheat/audit.hpp"
#include "singheat/control.hpp"
#include "singheat/geometry.hpp"
#include "singheat/hardy.hpp"
#include "singheat/pde.hpp"
#include "singheat/weights.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace singheat {

struct GeometrySpec {
  std::string kind = "tangent_disk";
  double length = 1, radius = 2, curvature = -1, cap_radius = 0.5;
  Geometry build() const;
};

struct HardyConfig {
  std::vector<int> interval_cells{100, 200, 400, 800, 1600};
  double disk_radius = 1;
  std::vector<int> disk_rings{32, 64, 128};
  double grading = 2;
  double gamma = 1.5;
  int c0_cells = 256;
  int fields = 500;
  double C2_cap = 1e3;
  double phi_r1 = 0;
  int phi_samples = 200;
};

struct BlowupConfig {
  std::vector<double> mu{0.2, 0.35};
  int levels = 4;
  int base_cells = 8192;
  double t_probe = 0.05;
  double dt = 1e-5;
};

struct SimulateConfig {
  int cells = 256;
  int rings = 16;
  double grading = 1;
  double dt = 1e-3;
  int steps = 100;
  std::string scheme = "implicit_euler";
  int stride = 10;
  std::string u0 = "smooth";
  std::vector<double> mu{0, 0.2};
  BlowupConfig blowup;
};

struct ControlConfig {
  int cells = 256;
  int rings = 12;
  double grading = 1;
  double T = 0.5;
  int steps = 200;
  std::string scheme = "implicit_euler";
  std::vector<double> epsilon{1e-2, 1e-4, 1e-6};
  double cg_tol = 1e-10;
  int max_iter = 500;
  std::string u0 = "smooth";
  int stride = 20;
  std::string scan_parameter = "mu";
  std::vector<double> scan_values;
};

struct ObservabilityConfig {
  std::vector<double> mu{0, 0.1, 0.2, 0.24};
  std::vector<double> T{0.25, 0.5, 1.0};
};

struct Overrides {
  std::optional<double> delta, r0, C3, C_lambda;
};

struct Scenario {
  std::string name = "scenario";
  GeometrySpec geometry;
  Region omega, omega0;
  double gamma = 1.5, s = 1, T = 1, mu = 0;
  std::vector<double> lambda_grid{6, 8, 12, 16, 24, 32};
  std::uint64_t seed = 1;
  std::size_t psi_samples = 10000;
  AuditOptions audit;
  Overrides overrides;
  HardyConfig hardy;
  SimulateConfig simulate;
  ControlConfig control;
  ObservabilityConfig observability;
  nlohmann::json raw;
};

// Throws ConfigError on unknown keys, wrong types or invalid values.
Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& sc);

struct RunOptions {
  std::string out_dir = "out";
  int workers = 1;
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

using HeaderRow = std::array<std::string, 3>; // key, value, binding

struct WeightSetup {
  bool built = false;
  std::string failure;
  Geometry geometry = Geometry::interval(1);
  Regions regions;
  PsiKit kit;
  RecipeChoice r0;
  double C3 = 0;
  std::string C3_binding;
  bool audited = false;
  bool lambda0_found = false;
  AuditReport report; // at lambda0, or the last one tried
  std::vector<AuditReport> tried;
  std::vector<HeaderRow> header;
};

WeightSetup prepare_weights(const Scenario& sc, const RunOptions& opt);
void write_header(std::ostream& os, const std::vector<HeaderRow>& rows);

struct SummaryRow {
  std::string item, value, status;
};

// Each returns the process exit code: 0 pass, 1 check or solver failure,
// 2 usage or configuration error. Diagnostics go to `log`.
int cmd_audit(const Scenario& sc, const RunOptions& opt, std::ostream& log);
int cmd_hardy(const Scenario& sc, const RunOptions& opt, std::ostream& log);
int cmd_simulate(const Scenario& sc, const RunOptions& opt, std::ostream& log);
int cmd_control(const Scenario& sc, const RunOptions& opt, std::ostream& log);
int cmd_observability(const Scenario& sc, const RunOptions& opt, std::ostream& log);
int cmd_report(const Scenario& sc, const RunOptions& opt, std::ostream& log);

// Dispatch by subcommand name, loading the scenario and mapping exceptions
// to exit codes.
int run_command(const std::string& name, const std::string& config_path, const RunOptions& opt, std::ostream& log);

// Mesh and initial data for a scenario geometry.
Grid scenario_grid(const Scenario& sc, int cells, int rings, double grading);
VecX initial_field(const Scenario& sc, const Grid& g, const std::string& kind);

} // namespace singheat
