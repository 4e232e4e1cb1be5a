#include "synergy/hybrid_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string_view>

namespace synergy {

namespace {

constexpr double kMinStep = 1e-14;
constexpr int kMaxBisections = 60;
constexpr int kZenoWindow = 10;
constexpr double kZenoFlowTime = 1e-6;

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                 b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
// b - b* (fifth minus fourth order weights)
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

struct StepResult {
  Vec x;
  Vec err;
};

StepResult dopri_step(const HybridSystemDef& sys, const Vec& x, double h) {
  const Vec k1 = sys.flow_map(x);
  const Vec k2 = sys.flow_map(x + h * (a21 * k1));
  const Vec k3 = sys.flow_map(x + h * (a31 * k1 + a32 * k2));
  const Vec k4 = sys.flow_map(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const Vec k5 = sys.flow_map(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const Vec k6 = sys.flow_map(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  Vec xn = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const Vec k7 = sys.flow_map(xn);
  Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  return {std::move(xn), std::move(err)};
}

double error_norm(const Vec& x, const Vec& xn, const Vec& err, const SolverConfig& cfg) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x[i]), std::abs(xn[i]));
    const double r = std::abs(err[i]) / scale;
    if (!std::isfinite(r)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, r);
  }
  return worst;
}

void retract(const HybridSystemDef& sys, Vec& x) {
  if (sys.normalize) sys.normalize(x);
}

bool reached_stop_ball(const SolverConfig& cfg, const Vec& x) {
  return cfg.stop_ball && cfg.stop_ball->distance && cfg.stop_ball->distance(x) <= cfg.stop_ball->radius;
}

std::string describe(std::string_view what, double t) {
  std::ostringstream os;
  os.precision(17);
  os << what << " at t = " << t;
  return os.str();
}

}  // namespace

bool HybridTimeDomain::contains(HybridTime ht) const {
  return std::any_of(intervals.begin(), intervals.end(), [&](const FlowInterval& iv) {
    return iv.j == ht.j && ht.t >= iv.t_start && ht.t <= iv.t_end;
  });
}

HybridTime HybridArc::end_time() const {
  if (domain.intervals.empty()) return {};
  return {domain.intervals.back().t_end, domain.intervals.back().j};
}

std::size_t HybridArc::sample_count() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.size();
  return n;
}

void SolverConfig::validate() const {
  if (!(t_max >= 0.0)) throw std::invalid_argument("solver: t_max must be nonnegative");
  if (j_max < 0) throw std::invalid_argument("solver: j_max must be nonnegative");
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || !(event_tol > 0.0))
    throw std::invalid_argument("solver: tolerances must be positive");
  if (!(max_step > 0.0)) throw std::invalid_argument("solver: max_step must be positive");
}

FlowSegment advance_flow(const Vec& state, double t0, const HybridSystemDef& sys,
                         const SolverConfig& cfg) {
  const double tol = cfg.event_tol;
  FlowSegment seg;
  Vec x = state;
  double t = t0;
  seg.samples.push_back({t, x});

  if (reached_stop_ball(cfg, x)) {
    seg.exit_reason = ExitReason::converged;
    return seg;
  }

  double h = std::min(cfg.max_step, 1e-3);
  double g_prev = sys.jump_indicator(x);

  while (t < cfg.t_max) {
    const double remaining = cfg.t_max - t;
    h = std::min({h, cfg.max_step, remaining});
    const bool last = h == remaining;

    StepResult step = dopri_step(sys, x, h);
    const double err = error_norm(x, step.x, step.err, cfg);
    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);

    if (!(err <= 1.0)) {
      h *= std::min(factor, 0.9);
      if (h < kMinStep) throw IntegrationStalled(describe("step size underflow", t));
      continue;
    }

    Vec xn = std::move(step.x);
    retract(sys, xn);
    const double t_new = last ? cfg.t_max : t + h;
    const double g_new = sys.jump_indicator(xn);

    const bool enters_from_below = g_prev < -tol && g_new >= -tol && g_new <= tol;
    const bool overshoots = g_prev <= tol && g_new > tol;
    if (enters_from_below) {
      seg.samples.push_back({t_new, std::move(xn)});
      seg.exit_reason = ExitReason::jump_boundary;
      return seg;
    }
    if (overshoots) {
      double lo = 0.0;
      double hi = h;
      Vec x_hi = xn;
      for (int it = 0; it < kMaxBisections; ++it) {
        const double mid = 0.5 * (lo + hi);
        Vec xm = dopri_step(sys, x, mid).x;
        retract(sys, xm);
        const double gm = sys.jump_indicator(xm);
        if (gm >= -tol && gm <= tol) {
          hi = mid;
          x_hi = std::move(xm);
          break;
        }
        if (gm > tol) {
          hi = mid;
          x_hi = std::move(xm);
        } else {
          lo = mid;
        }
      }
      seg.samples.push_back({(hi == h) ? t_new : t + hi, std::move(x_hi)});
      seg.exit_reason = ExitReason::jump_boundary;
      return seg;
    }

    if (sys.flow_indicator(xn) > tol)
      throw DomainEscape(describe("flow set left without reaching the jump set", t_new));

    t = t_new;
    x = std::move(xn);
    g_prev = g_new;
    seg.samples.push_back({t, x});

    if (reached_stop_ball(cfg, x)) {
      seg.exit_reason = ExitReason::converged;
      return seg;
    }
    h *= factor;
  }
  seg.exit_reason = ExitReason::time;
  return seg;
}

Vec apply_jump(const Vec& state, const HybridSystemDef& sys, double event_tol) {
  if (sys.jump_indicator(state) < -event_tol)
    throw JumpOutsideD("jump requested outside the jump set");
  return sys.jump_map(state);
}

HybridArc solve(const HybridSystemDef& sys, const Vec& x0, const SolverConfig& cfg) {
  cfg.validate();
  const double tol = cfg.event_tol;
  auto in_c = [&](const Vec& x) { return sys.flow_indicator(x) <= tol; };
  auto in_d = [&](const Vec& x) { return sys.jump_indicator(x) >= -tol; };

  if (!in_c(x0) && !in_d(x0)) throw InvalidInitialState("initial state lies outside C and D");

  HybridArc arc;
  arc.domain.intervals.push_back({0.0, 0.0, 0});
  arc.samples.push_back({{0.0, x0}});

  Vec x = x0;
  double t = 0.0;
  int j = 0;
  bool pending_jump = false;

  while (true) {
    if (reached_stop_ball(cfg, x) || t >= cfg.t_max) break;

    const bool c = in_c(x);
    const bool d = in_d(x);
    if (!c && !d) throw DomainEscape(describe("state left C and D after a jump", t));

    const bool jump = pending_jump || (d && (!c || cfg.priority == Priority::jump_first));
    if (jump) {
      if (j >= cfg.j_max) {
        const auto n = arc.jumps.size();
        if (n >= static_cast<std::size_t>(kZenoWindow) &&
            t - arc.jumps[n - kZenoWindow].t < kZenoFlowTime)
          throw ZenoSuspected(describe("jump budget exhausted with no flow", t));
        break;
      }
      Vec xn = apply_jump(x, sys, tol);
      arc.jumps.push_back({t, j, x, xn});
      ++j;
      arc.domain.intervals.push_back({t, t, j});
      arc.samples.push_back({{t, xn}});
      x = std::move(xn);
      pending_jump = false;
      continue;
    }

    FlowSegment seg = advance_flow(x, t, sys, cfg);
    auto& bucket = arc.samples.back();
    for (std::size_t k = 1; k < seg.samples.size(); ++k) bucket.push_back(std::move(seg.samples[k]));
    t = bucket.back().t;
    x = bucket.back().x;
    arc.domain.intervals.back().t_end = t;

    if (seg.exit_reason != ExitReason::jump_boundary) break;
    pending_jump = true;
  }
  return arc;
}

std::vector<DomainViolation> validate_domain(const HybridArc& arc) {
  using K = DomainViolation::Kind;
  std::vector<DomainViolation> out;
  const auto& iv = arc.domain.intervals;
  if (iv.empty()) {
    out.push_back({K::empty_arc, 0, "domain has no intervals"});
    return out;
  }
  if (arc.samples.size() != iv.size())
    out.push_back({K::jump_count, 0, "sample buckets do not match interval count"});

  for (std::size_t k = 0; k < iv.size(); ++k) {
    if (!(iv[k].t_start <= iv[k].t_end) || iv[k].t_start < 0.0)
      out.push_back({K::interval_order, k, "interval ends before it starts"});
    if (k > 0) {
      if (iv[k].t_start != iv[k - 1].t_end)
        out.push_back({K::contiguity, k, "interval does not start where the previous one ends"});
      if (iv[k].j != iv[k - 1].j + 1)
        out.push_back({K::j_increment, k, "jump counter does not increase by one"});
    } else if (iv[k].j < 0) {
      out.push_back({K::j_increment, k, "negative jump counter"});
    }
    if (k < arc.samples.size()) {
      const auto& bucket = arc.samples[k];
      if (bucket.empty()) {
        out.push_back({K::sample_outside_interval, k, "interval has no samples"});
        continue;
      }
      bool outside = false;
      bool unordered = false;
      for (std::size_t s = 0; s < bucket.size(); ++s) {
        if (bucket[s].t < iv[k].t_start || bucket[s].t > iv[k].t_end) outside = true;
        if (s > 0 && bucket[s].t < bucket[s - 1].t) unordered = true;
      }
      if (outside) out.push_back({K::sample_outside_interval, k, "sample time outside its interval"});
      if (unordered) out.push_back({K::sample_order, k, "sample times decrease"});
    }
  }

  if (arc.jumps.size() + 1 != iv.size()) {
    out.push_back({K::jump_count, 0, "jump records do not match interval count"});
    return out;
  }
  for (std::size_t k = 0; k < arc.jumps.size(); ++k) {
    const auto& jr = arc.jumps[k];
    if (jr.t != iv[k].t_end || jr.j != iv[k].j)
      out.push_back({K::jump_time, k, "jump record does not sit at the end of its interval"});
    if (k + 1 < arc.samples.size() && !arc.samples[k + 1].empty() &&
        arc.samples[k + 1].front().x != jr.after)
      out.push_back({K::jump_state, k, "post-jump state differs from the next interval's first sample"});
    if (k < arc.samples.size() && !arc.samples[k].empty() && arc.samples[k].back().x != jr.before)
      out.push_back({K::jump_state, k, "pre-jump state differs from the interval's last sample"});
  }
  return out;
}

std::string to_string(ExitReason r) {
  switch (r) {
    case ExitReason::time: return "time";
    case ExitReason::converged: return "converged";
    case ExitReason::jump_boundary: return "jump_boundary";
  }
  return "unknown";
}

std::string to_string(Priority p) { return p == Priority::jump_first ? "jump_first" : "flow_first"; }

Priority parse_priority(const std::string& s) {
  if (s == "jump_first") return Priority::jump_first;
  if (s == "flow_first") return Priority::flow_first;
  throw std::invalid_argument("unknown priority '" + s + "'");
}

}  // namespace synergy
