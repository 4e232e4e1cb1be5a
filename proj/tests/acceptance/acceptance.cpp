// Acceptance checks for the obstacle-avoidance case study. Prints one line per
// criterion and exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "synergy/oracles.hpp"
#include "synergy/property_suite.hpp"
#include "synergy/sim.hpp"

using namespace synergy;
namespace ob = synergy::obstacle;

namespace {

constexpr std::uint64_t kSeed = 1;

struct Run {
  std::string label;
  ob::Scenario sc;
  HybridArc arc;
  double seconds = 0.0;
  bool case_study = true;
};

Run simulate(const std::string& label, ob::ControllerKind kind, int q0, const ob::ScenarioParams& params,
             bool case_study) {
  const auto start = std::chrono::steady_clock::now();
  ob::Scenario sc = ob::make_scenario(kind, q0, {}, params);
  HybridArc arc = solve(sc.system, sc.initial_state, params.solver);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {label, std::move(sc), std::move(arc), secs, case_study};
}

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("%s %d %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// V1 with the true parameter, read from the adaptive head of the state.
ArcPotential v1_true(const Run& r) {
  const PotentialFamily V1 = lift_adaptive(r.sc.design).potential_family;
  const Vec theta = r.sc.params.theta;
  return [V1, theta](const Vec& s) { return V1(s.head(3), s.segment(3, 3), theta); };
}

ArcPotential v_true(const Run& r) {
  return [&r](const Vec& s) { return r.sc.true_potential(s); };
}

double final_norm_z(const Run& r) { return r.sc.position(r.arc.back().x).norm(); }
double final_est_err(const Run& r) { return (r.sc.theta_hat(r.arc.back().x) - r.sc.params.theta).norm(); }

double min_clearance(const Run& r) {
  double c = INFINITY;
  for (const auto& iv : r.arc.samples)
    for (const auto& smp : iv)
      c = std::min(c, (r.sc.position(smp.x) - r.sc.obstacle.center).norm() - r.sc.obstacle.radius);
  return c;
}

double max_theta_hat(const Run& r) {
  double m = 0.0;
  for (const auto& iv : r.arc.samples)
    for (const auto& smp : iv) m = std::max(m, r.sc.theta_hat(smp.x).norm());
  return m;
}

double max_flow_increase(const HybridArc& arc, const ArcPotential& V) {
  double worst = -INFINITY;
  for (const auto& iv : arc.samples)
    for (std::size_t i = 1; i < iv.size(); ++i)
      worst = std::max(worst, V(iv[i].x).value() - V(iv[i - 1].x).value());
  return worst;
}

// Largest ratio of |u_{k+1} - u_k| to the bound 1.5 max|u'| dt + 1e-9.
double continuity_ratio(const Run& r) {
  double worst = 0.0;
  for (const auto& iv : r.arc.samples)
    for (std::size_t i = 1; i < iv.size(); ++i) {
      const double du = (r.sc.input(iv[i].x) - r.sc.input(iv[i - 1].x)).norm();
      const double rate = std::max(r.sc.system.flow_map(iv[i].x).tail(2).norm(),
                                   r.sc.system.flow_map(iv[i - 1].x).tail(2).norm());
      worst = std::max(worst, du / (1.5 * rate * (iv[i].t - iv[i - 1].t) + 1e-9));
    }
  return worst;
}

double reset_identity_error(const Run& r) {
  double worst = 0.0;
  for (const auto& jr : r.arc.jumps) {
    const Vec x = jr.after.head(3);
    const Vec k1 = kappa1(r.sc.design, x, jr.after.segment(3, 3));
    worst = std::max(worst, (jr.after.tail(2) - k1).cwiseAbs().maxCoeff());
  }
  return worst;
}

// Smallest V(before) - V(after) - delta(before) over the jumps.
double min_jump_margin(const Run& r, const ArcPotential& V) {
  double m = INFINITY;
  for (const auto& jr : r.arc.jumps)
    m = std::min(m, V(jr.before).value() - V(jr.after).value() - r.sc.delta(jr.before));
  return m;
}

double min_separation(const HybridArc& arc) {
  double m = INFINITY;
  for (std::size_t k = 1; k < arc.jumps.size(); ++k) m = std::min(m, arc.jumps[k].t - arc.jumps[k - 1].t);
  return m;
}

std::string run_line(const Run& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "[%s |z|=%.3g err=%.3g jumps=%zu %.3fs]", r.label.c_str(), final_norm_z(r),
                final_est_err(r), r.arc.jumps.size(), r.seconds);
  return buf;
}

}  // namespace

int main() {
  const ob::ScenarioParams defaults;
  std::vector<Run> runs;
  for (auto kind : {ob::ControllerKind::adaptive, ob::ControllerKind::backstep})
    for (int q0 : {-1, 1})
      runs.push_back(simulate(ob::to_string(kind) + (q0 < 0 ? " q0=-1" : " q0=+1"), kind, q0, defaults, true));

  // Starting close to the q = +1 chart singularity forces a switch, covering the jump checks.
  ob::ScenarioParams forced = defaults;
  forced.z_init = Eigen::Vector2d(1.0 + 0.7 * std::cos(1.4), 0.7 * std::sin(1.4));
  for (auto kind : {ob::ControllerKind::adaptive, ob::ControllerKind::backstep})
    runs.push_back(simulate(ob::to_string(kind) + " forced", kind, 1, forced, false));

  const auto adaptive_runs = [&] { return std::vector<const Run*>{&runs[0], &runs[1], &runs[4]}; }();
  const auto backstep_runs = [&] { return std::vector<const Run*>{&runs[2], &runs[3], &runs[5]}; }();

  // 1
  {
    bool ok = true;
    std::string d;
    for (int k : {0, 1}) {
      ok = ok && final_norm_z(runs[k]) <= 0.1 && final_est_err(runs[k]) <= 0.15 && runs[k].seconds < 5.0;
      d += run_line(runs[k]) + " ";
    }
    report(1, ok, "adaptive endpoints |z|<=0.1 err<=0.15 t<5s " + d);
  }

  // 2
  {
    bool ok = true;
    std::string d;
    for (int k : {2, 3}) {
      ok = ok && final_norm_z(runs[k]) <= 0.1 && final_est_err(runs[k]) <= 0.15 && runs[k].seconds < 5.0;
      d += run_line(runs[k]) + " ";
    }
    double cont = 0.0;
    double reset = 0.0;
    std::size_t jumps = 0;
    for (const Run* r : backstep_runs) {
      cont = std::max(cont, continuity_ratio(*r));
      reset = std::max(reset, reset_identity_error(*r));
      jumps += r->arc.jumps.size();
    }
    ok = ok && cont <= 1.0 && reset <= 1e-12 && jumps > 0;
    report(2, ok,
           "backstep endpoints " + d + "continuity ratio=" + fmt("%.3g", cont) + " max|u+ - kappa1|=" +
               fmt("%.3g", reset) + " over " + std::to_string(jumps) + " jumps");
  }

  // 3
  {
    double c = INFINITY;
    for (int k = 0; k < 4; ++k) c = std::min(c, min_clearance(runs[k]));
    report(3, c > 0.0, "min clearance " + fmt("%.6g", c));
  }

  // 4
  {
    double adaptive = -INFINITY;
    for (const Run* r : adaptive_runs) adaptive = std::max(adaptive, max_flow_increase(r->arc, v1_true(*r)));
    double backstep = -INFINITY;
    double backstep_v1 = -INFINITY;
    for (const Run* r : backstep_runs) {
      backstep = std::max(backstep, max_flow_increase(r->arc, v_true(*r)));
      backstep_v1 = std::max(backstep_v1, max_flow_increase(r->arc, v1_true(*r)));
    }
    report(4, adaptive <= 1e-6 && backstep <= 1e-6,
           "max flow increase V1 adaptive=" + fmt("%.3g", adaptive) + " V2 backstep=" + fmt("%.3g", backstep) +
               " (V1 on backstep arcs " + fmt("%.3g", backstep_v1) + ") tol 1e-6");
  }

  // 5
  {
    double margin = INFINITY;
    std::size_t jumps = 0;
    for (const Run& r : runs) {
      margin = std::min(margin, min_jump_margin(r, v1_true(r)));
      jumps += r.arc.jumps.size();
    }
    report(5, jumps > 0 && margin >= -1e-9,
           "min V1 decrease minus delta " + fmt("%.6g", margin) + " over " + std::to_string(jumps) + " jumps");
  }

  // 6
  {
    double m = 0.0;
    for (const Run& r : runs) m = std::max(m, max_theta_hat(r));
    report(6, m <= 2.0 + 1e-9, "max |theta_hat| " + fmt("%.6g", m));
  }

  // 7
  {
    const props::SuiteResult r = props::proj_inequality(kSeed, 10000);
    report(7, r.passed() && r.cases == 10000,
           std::to_string(r.cases) + " cases, " + std::to_string(r.failures) + " failures, worst " +
               fmt("%.3g", r.worst));
  }

  // 8
  {
    const props::SuiteResult gap = props::robust_gap_oracle(kSeed, 1000);
    const props::SuiteResult reset = props::g_hat_oracle(kSeed, 1000);
    report(8, gap.passed() && reset.passed(),
           "robust gap worst " + fmt("%.3g", gap.worst) + " (tol " + fmt("%.0e", gap.tolerance) + "), reset worst " +
               fmt("%.3g", reset.worst) + " (tol " + fmt("%.0e", reset.tolerance) + ")");
  }

  // 9
  {
    const props::SuiteResult trip = props::chart_round_trip(kSeed, 1000);
    const props::SuiteResult jac = props::analytic_jacobians(kSeed, 1000);
    report(9, trip.passed() && jac.passed(),
           "round trip worst " + fmt("%.3g", trip.worst) + ", Jacobian worst " + fmt("%.3g", jac.worst));
  }

  // 10
  {
    HybridSystemDef timer;
    timer.flow_map = [](const Vec&) { return Vec(Vec::Ones(1)); };
    timer.flow_indicator = [](const Vec& x) { return x[0] - 1.0; };
    timer.jump_indicator = [](const Vec& x) { return x[0] - 1.0; };
    timer.jump_map = [](const Vec&) { return Vec(Vec::Zero(1)); };
    SolverConfig cfg;
    cfg.t_max = 3.5;
    const HybridArc tarc = solve(timer, Vec::Zero(1), cfg);
    double jump_err = tarc.jumps.size() == 3 ? 0.0 : INFINITY;
    for (std::size_t k = 0; k < tarc.jumps.size() && k < 3; ++k)
      jump_err = std::max(jump_err, std::abs(tarc.jumps[k].t - (k + 1.0)));

    HybridSystemDef decay;
    decay.flow_map = [](const Vec& x) { return Vec(-x); };
    decay.flow_indicator = [](const Vec&) { return -1.0; };
    decay.jump_indicator = [](const Vec&) { return -1.0; };
    decay.jump_map = [](const Vec& x) { return x; };
    cfg.t_max = 1.0;
    const HybridArc darc = solve(decay, Vec::Ones(1), cfg);
    const double decay_err = std::abs(darc.back().x[0] - std::exp(-1.0));

    std::size_t bad_domains = validate_domain(tarc).size() + validate_domain(darc).size();
    for (const Run& r : runs) bad_domains += validate_domain(r.arc).size();

    report(10, jump_err <= 1e-9 && decay_err <= 1e-8 && bad_domains == 0,
           "timer jump error " + fmt("%.3g", jump_err) + ", decay error " + fmt("%.3g", decay_err) + ", " +
               std::to_string(bad_domains) + " domain violations over " + std::to_string(runs.size() + 2) + " arcs");
  }

  // 11
  {
    double sep = INFINITY;
    std::size_t jumps = 0;
    for (int k = 0; k < 4; ++k) {
      sep = std::min(sep, min_separation(runs[k].arc));
      jumps += runs[k].arc.jumps.size();
    }
    double forced_sep = std::min(min_separation(runs[4].arc), min_separation(runs[5].arc));
    report(11, sep >= 1e-3,
           std::to_string(jumps) + " jumps in the case study, min separation " + fmt("%.6g", sep) +
               " (forced arcs " + fmt("%.6g", forced_sep) + ")");
  }

  return failures == 0 ? 0 : 1;
}
