#pragma once

// Scenario runner: configuration, simulation, monitors, CSV trajectories and
// JSON summaries.
//
// Configuration file (JSON object, every key optional):
//
//   {
//     "scenario":   "obstacle",
//     "controller": "nominal" | "adaptive" | "backstep",
//     "q0":         -1 | 1,
//     "z_init":     [2, 0],
//     "theta":      [0.7071067811865476, 0.7071067811865476],
//     "theta_hat0": [0, 0],
//     "u0":         "kappa1" | "zero",
//     "obstacle":   { "center": [1, 0], "radius": 0.5 },
//     "gains":      { "k_u": 1, "Gamma1": [[1,0],[0,1]], "Gamma2": [[1,0],[0,1]],
//                     "eps": 1, "theta0": 1, "delta": 1 },
//     "solver":     { "t_max": 10, "j_max": 1000, "abs_tol": 1e-9, "rel_tol": 1e-9,
//                     "event_tol": 1e-10, "max_step": 0.01,
//                     "priority": "jump_first" | "flow_first" },
//     "output":     { "csv": "run.csv", "summary": "run.json" },
//     "seed":       0
//   }
//
// Unknown keys are rejected.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "synergy/obstacle_world.hpp"

namespace synergy::sim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputPaths {
  std::string csv;
  std::string summary;
};

struct ScenarioConfig {
  std::string scenario = "obstacle";
  obstacle::ControllerKind controller = obstacle::ControllerKind::adaptive;
  int q0 = -1;
  obstacle::ObstacleDisk obstacle;
  obstacle::ScenarioParams params;
  OutputPaths output;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

/// Applies the keys present in `json_text` on top of `base`.
ScenarioConfig parse_config(const std::string& json_text, ScenarioConfig base = {});
ScenarioConfig load_config(const std::string& path, ScenarioConfig base = {});
std::string config_to_json(const ScenarioConfig& cfg);

struct RunSummary {
  std::string controller;
  int q0 = 0;
  double final_time = 0.0;
  int jump_count = 0;
  double final_norm_z = 0.0;
  double final_estimation_error = 0.0;
  double min_clearance = 0.0;
  double min_jump_separation = 0.0;  // +inf with fewer than two jumps
  double max_theta_hat_norm = 0.0;
  std::size_t flow_violations = 0;
  std::size_t jump_violations = 0;
  std::size_t clearance_violations = 0;
  std::size_t domain_violations = 0;
  double wall_clock_seconds = 0.0;

  std::size_t total_violations() const {
    return flow_violations + jump_violations + clearance_violations + domain_violations;
  }
};

inline constexpr double kFlowMonitorTol = 1e-6;
inline constexpr double kJumpMonitorTol = 1e-9;

struct RunResult {
  obstacle::Scenario scenario;
  HybridArc arc;
  RunSummary summary;
};

/// Builds the scenario, solves, runs the monitors with the true parameter
/// and writes whichever outputs are configured.
RunResult run(const ScenarioConfig& cfg);

/// Computes the summary of an arc without timing information.
RunSummary summarize(const obstacle::Scenario& sc, const HybridArc& arc);

inline constexpr const char* kCsvHeader =
    "t,j,z1,z2,x1,x2,x3,q,that1,that2,u1,u2,V_true,gap_robust,dist_origin,est_err";

/// One row per sample; the state at a jump appears twice, once per interval.
void write_csv(std::ostream& os, const obstacle::Scenario& sc, const HybridArc& arc);
void emit_csv(const obstacle::Scenario& sc, const HybridArc& arc, const std::string& path);

std::string summary_to_json(const RunSummary& s);
void write_summary(const RunSummary& s, const std::string& path);

/// Runs independent configurations on up to `threads` workers. Results keep
/// the input order; a failing run rethrows its exception after all finish.
std::vector<RunResult> run_batch(const std::vector<ScenarioConfig>& cfgs, unsigned threads);

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

}  // namespace synergy::sim
