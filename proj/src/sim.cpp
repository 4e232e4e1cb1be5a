#include "synergy/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace synergy::sim {

namespace ob = synergy::obstacle;
using json = nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw ConfigError(what); }

void require_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      bad("unknown key '" + key + "' in " + where);
  }
}

double number(const json& j, const std::string& key) {
  if (!j.is_number()) bad("'" + key + "' must be a number");
  return j.get<double>();
}

Vec vec2(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2) bad("'" + key + "' must be an array of two numbers");
  return Eigen::Vector2d(number(j[0], key), number(j[1], key));
}

Mat mat2(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2) bad("'" + key + "' must be a 2x2 array");
  Mat m(2, 2);
  for (int r = 0; r < 2; ++r) m.row(r) = vec2(j[r], key).transpose();
  return m;
}

json to_json(const Vec& v) { return json::array({v[0], v[1]}); }
json to_json(const Mat& m) { return json::array({to_json(Vec(m.row(0).transpose())), to_json(Vec(m.row(1).transpose()))}); }

std::string string_of(const json& j, const std::string& key) {
  if (!j.is_string()) bad("'" + key + "' must be a string");
  return j.get<std::string>();
}

template <class F>
auto rethrow_as_config(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void write_or_throw(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw OutputError("cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw OutputError("write to '" + path + "' failed");
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ScenarioConfig::validate() const {
  if (scenario != "obstacle") bad("unknown scenario '" + scenario + "'");
  if (q0 != 1 && q0 != -1) bad("q0 must be -1 or 1");
  if (params.theta.size() != 2 || params.theta_hat0.size() != 2) bad("theta and theta_hat0 must be 2-vectors");
  if (!params.theta.allFinite() || !params.theta_hat0.allFinite()) bad("theta and theta_hat0 must be finite");
  if (params.theta.norm() > params.theta0 + 1e-12) bad("theta lies outside the parameter ball");
  if (params.theta_hat0.norm() > params.theta0 + params.eps + 1e-12)
    bad("theta_hat0 lies outside the inflated parameter ball");
  if (!(params.delta > 0.0) || !std::isfinite(params.delta)) bad("delta must be positive and finite");
  rethrow_as_config([&] {
    obstacle.validate();
    params.solver.validate();
    ParamBall{params.theta0, params.eps, params.Gamma1}.validate();
    BackstepGains{params.Gamma2, params.k_u}.validate();
    return 0;
  });
  if ((params.z_init - obstacle.center).norm() <= obstacle.radius + ob::kGuardBand)
    bad("initial position lies inside the obstacle");
  if (!output.csv.empty() && output.csv == output.summary) bad("csv and summary paths must differ");
}

ScenarioConfig parse_config(const std::string& json_text, ScenarioConfig cfg) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("invalid JSON: ") + e.what());
  }
  require_keys(j, "config", {"scenario", "controller", "q0", "z_init", "theta", "theta_hat0", "u0", "obstacle",
                             "gains", "solver", "output", "seed"});
  auto& p = cfg.params;
  if (j.contains("scenario")) cfg.scenario = string_of(j["scenario"], "scenario");
  if (j.contains("controller"))
    cfg.controller = rethrow_as_config([&] { return ob::parse_controller_kind(string_of(j["controller"], "controller")); });
  if (j.contains("q0")) {
    if (!j["q0"].is_number_integer()) bad("'q0' must be an integer");
    cfg.q0 = j["q0"].get<int>();
  }
  if (j.contains("z_init")) p.z_init = vec2(j["z_init"], "z_init");
  if (j.contains("theta")) p.theta = vec2(j["theta"], "theta");
  if (j.contains("theta_hat0")) p.theta_hat0 = vec2(j["theta_hat0"], "theta_hat0");
  if (j.contains("u0")) p.u0 = rethrow_as_config([&] { return ob::parse_initial_input(string_of(j["u0"], "u0")); });
  if (j.contains("obstacle")) {
    const json& o = j["obstacle"];
    require_keys(o, "obstacle", {"center", "radius"});
    if (o.contains("center")) cfg.obstacle.center = vec2(o["center"], "center");
    if (o.contains("radius")) cfg.obstacle.radius = number(o["radius"], "radius");
  }
  if (j.contains("gains")) {
    const json& g = j["gains"];
    require_keys(g, "gains", {"k_u", "Gamma1", "Gamma2", "eps", "theta0", "delta"});
    if (g.contains("k_u")) p.k_u = number(g["k_u"], "k_u");
    if (g.contains("Gamma1")) p.Gamma1 = mat2(g["Gamma1"], "Gamma1");
    if (g.contains("Gamma2")) p.Gamma2 = mat2(g["Gamma2"], "Gamma2");
    if (g.contains("eps")) p.eps = number(g["eps"], "eps");
    if (g.contains("theta0")) p.theta0 = number(g["theta0"], "theta0");
    if (g.contains("delta")) p.delta = number(g["delta"], "delta");
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    require_keys(s, "solver", {"t_max", "j_max", "abs_tol", "rel_tol", "event_tol", "max_step", "priority"});
    auto& sv = p.solver;
    if (s.contains("t_max")) sv.t_max = number(s["t_max"], "t_max");
    if (s.contains("j_max")) {
      if (!s["j_max"].is_number_integer()) bad("'j_max' must be an integer");
      sv.j_max = s["j_max"].get<int>();
    }
    if (s.contains("abs_tol")) sv.abs_tol = number(s["abs_tol"], "abs_tol");
    if (s.contains("rel_tol")) sv.rel_tol = number(s["rel_tol"], "rel_tol");
    if (s.contains("event_tol")) sv.event_tol = number(s["event_tol"], "event_tol");
    if (s.contains("max_step")) sv.max_step = number(s["max_step"], "max_step");
    if (s.contains("priority"))
      sv.priority = rethrow_as_config([&] { return parse_priority(string_of(s["priority"], "priority")); });
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    require_keys(o, "output", {"csv", "summary"});
    if (o.contains("csv")) cfg.output.csv = string_of(o["csv"], "csv");
    if (o.contains("summary")) cfg.output.summary = string_of(o["summary"], "summary");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad("'seed' must be a nonnegative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path, ScenarioConfig base) {
  std::ifstream f(path);
  if (!f) bad("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    bad(path + ": " + e.what());
  }
}

std::string config_to_json(const ScenarioConfig& cfg) {
  const auto& p = cfg.params;
  nlohmann::ordered_json j;
  j["scenario"] = cfg.scenario;
  j["controller"] = ob::to_string(cfg.controller);
  j["q0"] = cfg.q0;
  j["z_init"] = to_json(Vec(p.z_init));
  j["theta"] = to_json(p.theta);
  j["theta_hat0"] = to_json(p.theta_hat0);
  j["u0"] = ob::to_string(p.u0);
  j["obstacle"] = {{"center", to_json(Vec(cfg.obstacle.center))}, {"radius", cfg.obstacle.radius}};
  j["gains"] = {{"k_u", p.k_u},   {"Gamma1", to_json(p.Gamma1)}, {"Gamma2", to_json(p.Gamma2)},
                {"eps", p.eps},   {"theta0", p.theta0},          {"delta", p.delta}};
  j["solver"] = {{"t_max", p.solver.t_max},     {"j_max", p.solver.j_max},
                 {"abs_tol", p.solver.abs_tol}, {"rel_tol", p.solver.rel_tol},
                 {"event_tol", p.solver.event_tol}, {"max_step", p.solver.max_step},
                 {"priority", to_string(p.solver.priority)}};
  j["output"] = {{"csv", cfg.output.csv}, {"summary", cfg.output.summary}};
  j["seed"] = cfg.seed;
  return j.dump(2);
}

RunSummary summarize(const ob::Scenario& sc, const HybridArc& arc) {
  RunSummary s;
  s.controller = ob::to_string(sc.kind);
  s.q0 = sc.q0;
  const Vec& xf = arc.back().x;
  s.final_time = arc.back().t;
  s.jump_count = static_cast<int>(arc.jumps.size());
  s.final_norm_z = sc.position(xf).norm();
  s.final_estimation_error = (sc.theta_hat(xf) - sc.params.theta).norm();

  s.min_clearance = std::numeric_limits<double>::infinity();
  for (const auto& bucket : arc.samples) {
    for (const auto& smp : bucket) {
      const double c = (sc.position(smp.x) - sc.obstacle.center).norm() - sc.obstacle.radius;
      s.min_clearance = std::min(s.min_clearance, c);
      if (!(c > 0.0)) ++s.clearance_violations;
      s.max_theta_hat_norm = std::max(s.max_theta_hat_norm, sc.theta_hat(smp.x).norm());
    }
  }
  s.min_jump_separation = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < arc.jumps.size(); ++k)
    s.min_jump_separation = std::min(s.min_jump_separation, arc.jumps[k].t - arc.jumps[k - 1].t);

  const ArcPotential V = [&sc](const Vec& x) { return sc.true_potential(x); };
  const ArcScalar delta = [&sc](const Vec& x) { return sc.delta(x); };
  s.flow_violations = monitor_flow_decrease(arc, V, kFlowMonitorTol).size();
  s.jump_violations = monitor_jump_decrease(arc, V, delta, kJumpMonitorTol).size();
  s.domain_violations = validate_domain(arc).size();
  return s;
}

void write_csv(std::ostream& os, const ob::Scenario& sc, const HybridArc& arc) {
  os << kCsvHeader << '\n';
  for (std::size_t k = 0; k < arc.samples.size(); ++k) {
    const int j = arc.domain.intervals[k].j;
    for (const auto& smp : arc.samples[k]) {
      const Vec& s = smp.x;
      const Eigen::Vector2d z = sc.position(s);
      const Eigen::Vector2d th = sc.theta_hat(s);
      const Eigen::Vector2d u = sc.input(s);
      const double fields[] = {
          smp.t, z[0], z[1], s[0], s[1], s[2], static_cast<double>(sc.chart(s)), th[0], th[1], u[0], u[1],
          sc.true_potential(s).value(), sc.robust_gap(s).value(), z.norm(), (th - sc.params.theta).norm()};
      os << format_double(fields[0]) << ',' << j;
      for (std::size_t f = 1; f < std::size(fields); ++f) os << ',' << format_double(fields[f]);
      os << '\n';
    }
  }
}

void emit_csv(const ob::Scenario& sc, const HybridArc& arc, const std::string& path) {
  std::ostringstream os;
  write_csv(os, sc, arc);
  write_or_throw(path, os.str());
}

std::string summary_to_json(const RunSummary& s) {
  auto real = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["controller"] = s.controller;
  j["q0"] = s.q0;
  j["final_time"] = real(s.final_time);
  j["jump_count"] = s.jump_count;
  j["final_norm_z"] = real(s.final_norm_z);
  j["final_estimation_error"] = real(s.final_estimation_error);
  j["min_clearance"] = real(s.min_clearance);
  j["min_jump_separation"] = real(s.min_jump_separation);
  j["max_theta_hat_norm"] = real(s.max_theta_hat_norm);
  j["flow_violations"] = s.flow_violations;
  j["jump_violations"] = s.jump_violations;
  j["clearance_violations"] = s.clearance_violations;
  j["domain_violations"] = s.domain_violations;
  j["wall_clock_seconds"] = s.wall_clock_seconds;
  return j.dump(2) + "\n";
}

void write_summary(const RunSummary& s, const std::string& path) { write_or_throw(path, summary_to_json(s)); }

RunResult run(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ob::Scenario sc = rethrow_as_config([&] { return ob::make_scenario(cfg.controller, cfg.q0, cfg.obstacle, cfg.params); });
  HybridArc arc = solve(sc.system, sc.initial_state, cfg.params.solver);
  RunSummary summary = summarize(sc, arc);
  summary.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!cfg.output.csv.empty()) emit_csv(sc, arc, cfg.output.csv);
  if (!cfg.output.summary.empty()) write_summary(summary, cfg.output.summary);
  return {std::move(sc), std::move(arc), std::move(summary)};
}

std::vector<RunResult> run_batch(const std::vector<ScenarioConfig>& cfgs, unsigned threads) {
  std::set<std::string> paths;
  for (const auto& c : cfgs) {
    for (const std::string* p : {&c.output.csv, &c.output.summary})
      if (!p->empty() && !paths.insert(*p).second) bad("output path '" + *p + "' is shared between batch runs");
  }

  std::vector<std::optional<RunResult>> slots(cfgs.size());
  std::vector<std::exception_ptr> errors(cfgs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      try {
        slots[i] = run(cfgs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cfgs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<RunResult> out;
  out.reserve(cfgs.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace synergy::sim
