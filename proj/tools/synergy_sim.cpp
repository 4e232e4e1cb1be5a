// synergy_sim: run the obstacle-avoidance scenarios and the property suites.
//
//   synergy_sim run [--config FILE] [--controller adaptive] [--q0 -1] [--t-max 10]
//                   [--out run.csv] [--summary run.json] [--strict]
//   synergy_sim run --batch a.json b.json ... [--threads N]
//   synergy_sim props [--seed 1] [--mutation none]
//
// Exit codes: 0 success, 1 property failure or output error, 2 monitor
// violation under --strict, 3 solver error, 4 configuration error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "synergy/property_suite.hpp"
#include "synergy/sim.hpp"

namespace {

using namespace synergy;

constexpr int kExitFailure = 1;
constexpr int kExitMonitor = 2;
constexpr int kExitSolver = 3;
constexpr int kExitConfig = 4;

struct RunOptions {
  std::string config;
  std::vector<std::string> batch;
  std::optional<std::string> scenario;
  std::optional<std::string> controller;
  std::optional<int> q0;
  std::optional<double> t_max;
  std::optional<int> j_max;
  std::optional<std::string> u0;
  std::optional<std::string> out;
  std::optional<std::string> summary;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool strict = false;
};

sim::ScenarioConfig apply_overrides(sim::ScenarioConfig cfg, const RunOptions& o) {
  if (o.scenario) cfg.scenario = *o.scenario;
  try {
    if (o.controller) cfg.controller = obstacle::parse_controller_kind(*o.controller);
    if (o.u0) cfg.params.u0 = obstacle::parse_initial_input(*o.u0);
  } catch (const std::invalid_argument& e) {
    throw sim::ConfigError(e.what());
  }
  if (o.q0) cfg.q0 = *o.q0;
  if (o.t_max) cfg.params.solver.t_max = *o.t_max;
  if (o.j_max) cfg.params.solver.j_max = *o.j_max;
  if (o.out) cfg.output.csv = *o.out;
  if (o.summary) cfg.output.summary = *o.summary;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void print_summary(const sim::RunSummary& s) {
  std::printf("%s q0=%+d t=%.6g jumps=%d |z|=%.6g |theta_hat-theta|=%.6g clearance=%.6g violations=%zu (%.3fs)\n",
              s.controller.c_str(), s.q0, s.final_time, s.jump_count, s.final_norm_z, s.final_estimation_error,
              s.min_clearance, s.total_violations(), s.wall_clock_seconds);
}

int run_command(const RunOptions& o) {
  std::vector<sim::ScenarioConfig> cfgs;
  if (o.batch.empty()) {
    sim::ScenarioConfig base;
    if (!o.config.empty()) base = sim::load_config(o.config);
    cfgs.push_back(apply_overrides(base, o));
  } else {
    if (!o.config.empty() || o.out || o.summary)
      throw sim::ConfigError("--batch takes its outputs from each config file; drop --config/--out/--summary");
    for (const auto& path : o.batch) cfgs.push_back(apply_overrides(sim::load_config(path), o));
  }
  for (const auto& c : cfgs) c.validate();

  const unsigned threads = o.threads > 0 ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  const auto results = cfgs.size() == 1 ? std::vector<sim::RunResult>{sim::run(cfgs.front())}
                                        : sim::run_batch(cfgs, threads);
  std::size_t violations = 0;
  for (const auto& r : results) {
    print_summary(r.summary);
    violations += r.summary.total_violations();
  }
  return (o.strict && violations > 0) ? kExitMonitor : 0;
}

int props_command(std::uint64_t seed, const std::string& mutation) {
  props::Mutation m;
  try {
    m = props::parse_mutation(mutation);
  } catch (const std::invalid_argument& e) {
    throw sim::ConfigError(e.what());
  }
  const props::PropertyReport rep = props::property_suite(seed, m);
  for (const auto& s : rep.suites) std::cout << s << '\n';
  std::cout << (rep.passed() ? "all suites passed" : "some suites failed") << " (seed " << seed << ")\n";
  return rep.passed() ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synergistic hybrid feedback simulator"};
  app.require_subcommand(1);

  RunOptions ro;
  CLI::App* run = app.add_subcommand("run", "simulate a scenario");
  run->add_option("--config", ro.config, "JSON configuration file");
  run->add_option("--batch", ro.batch, "configuration files run in parallel");
  run->add_option("--scenario", ro.scenario, "scenario family (obstacle)");
  run->add_option("--controller", ro.controller, "nominal | adaptive | backstep");
  run->add_option("--q0", ro.q0, "initial chart index (-1 or 1)");
  run->add_option("--t-max", ro.t_max, "final flow time");
  run->add_option("--j-max", ro.j_max, "maximum number of jumps");
  run->add_option("--u0", ro.u0, "initial input for backstepping: kappa1 | zero");
  run->add_option("--out", ro.out, "trajectory CSV path");
  run->add_option("--summary", ro.summary, "summary JSON path");
  run->add_option("--seed", ro.seed, "seed recorded with the run");
  run->add_option("--threads", ro.threads, "batch workers (default: hardware concurrency)");
  run->add_flag("--strict", ro.strict, "exit with status 2 on any monitor violation");

  std::uint64_t seed = 1;
  std::string mutation = "none";
  CLI::App* props_cmd = app.add_subcommand("props", "run the randomized property suites");
  props_cmd->add_option("--seed", seed, "random seed");
  props_cmd->add_option("--mutation", mutation, "fault injection: none | proj_sign_flip | zero_delta");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return run_command(ro);
    return props_command(seed, mutation);
  } catch (const sim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidController& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sim::OutputError& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  }
}
