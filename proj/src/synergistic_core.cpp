#include "synergy/synergistic_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace synergy {

Vec AffinePlant::f(const Vec& x, const Vec& xc, const Vec& u, const Vec& theta) const {
  Vec dx = input_matrix(x, xc) * u + disturbance_matrix(x, xc) * theta;
  if (drift) dx += drift(x, xc);
  return dx;
}

PlantModel AffinePlant::as_plant() const {
  PlantModel p;
  p.state_dim = state_dim;
  p.input_dim = input_dim;
  p.param_dim = param_dim;
  p.f = [self = *this](const Vec& x, const Vec& xc, const Vec& u, const Vec& theta) {
    return self.f(x, xc, u, theta);
  };
  p.normalize = normalize;
  return p;
}

double AffinePlant::check_matched(const std::vector<std::pair<Vec, Vec>>& probes, double tol) const {
  double worst = 0.0;
  for (const auto& [x, xc] : probes) {
    const Mat diff = disturbance_matrix(x, xc) - input_matrix(x, xc) * matched_uncertainty(x, xc);
    worst = std::max(worst, diff.cwiseAbs().maxCoeff());
  }
  if (worst > tol) throw InvalidController("disturbance does not enter through the input channel");
  return worst;
}

GapReport min_over_candidates(const ControllerData& ctrl, const Vec& x, const Vec& xc) {
  const std::vector<Vec> cands = ctrl.candidates(x, xc);
  if (cands.empty()) throw InfeasibleC1("empty candidate set");

  std::vector<ExtendedNonneg> values;
  values.reserve(cands.size());
  for (const Vec& g : cands) values.push_back(ctrl.potential(x, g));

  const auto best = std::min_element(values.begin(), values.end());
  if (best->is_infinite()) throw InfeasibleC1("every candidate has infinite potential");

  GapReport r;
  r.min_V = *best;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (values[k].is_finite() && values[k].value() - best->value() <= kTieTolerance) {
      r.argmin.push_back(cands[k]);
      r.argmin_index.push_back(k);
    }
  }
  r.gap = excess(ctrl.potential(x, xc), r.min_V);
  return r;
}

ExtendedNonneg controller_gap(const ControllerData& ctrl, const Vec& x, const Vec& xc) {
  if (ctrl.gap_override) return ctrl.gap_override(x, xc);
  return min_over_candidates(ctrl, x, xc).gap;
}

Vec controller_jump(const ControllerData& ctrl, const Vec& x, const Vec& xc) {
  if (ctrl.jump_override) return ctrl.jump_override(x, xc);
  return min_over_candidates(ctrl, x, xc).argmin.front();
}

Vec select_jump(const ControllerData& ctrl, const Vec& x, const Vec& xc, double event_tol) {
  const ExtendedNonneg gap = controller_gap(ctrl, x, xc);
  if (gap.is_finite() && gap.value() < ctrl.delta(x, xc) - event_tol)
    throw std::domain_error("select_jump called outside the jump set");
  return controller_jump(ctrl, x, xc);
}

void validate_delta(const ControllerData& ctrl, const std::vector<std::pair<Vec, Vec>>& probes) {
  if (!ctrl.delta) throw InvalidController("controller has no hysteresis margin");
  for (const auto& [x, xc] : probes) {
    const double d = ctrl.delta(x, xc);
    if (!(d > 0.0) || !std::isfinite(d))
      throw InvalidController("hysteresis margin delta must be positive and finite");
  }
}

HybridSystemDef build_closed_loop(const PlantModel& plant, const Vec& theta_true,
                                  const ControllerData& ctrl) {
  const int nx = plant.state_dim;
  const StackedState split{nx};

  HybridSystemDef sys;
  sys.flow_map = [plant, theta_true, ctrl, split](const Vec& s) {
    const Vec x = split.plant(s);
    const Vec xc = split.controller(s);
    const Vec u = ctrl.kappa(x, xc);
    Vec ds(s.size());
    ds.head(split.plant_dim) = plant.f(x, ctrl.nominal_view(xc), u, theta_true);
    ds.tail(s.size() - split.plant_dim) = ctrl.flow(x, xc);
    return ds;
  };
  auto indicator = [ctrl, split](const Vec& s) {
    const Vec x = split.plant(s);
    const Vec xc = split.controller(s);
    return controller_gap(ctrl, x, xc).finite_or(kIndicatorSentinel) - ctrl.delta(x, xc);
  };
  sys.flow_indicator = indicator;
  sys.jump_indicator = indicator;
  sys.jump_map = [ctrl, split](const Vec& s) {
    const Vec x = split.plant(s);
    Vec out = s;
    out.tail(s.size() - split.plant_dim) = controller_jump(ctrl, x, split.controller(s));
    return out;
  };
  if (plant.normalize) {
    sys.normalize = [norm = plant.normalize, nx](Vec& s) {
      Vec x = s.head(nx);
      norm(x);
      s.head(nx) = x;
    };
  }
  return sys;
}

std::vector<MonitorViolation> monitor_flow_decrease(const HybridArc& arc, const ArcPotential& V,
                                                    double tol) {
  std::vector<MonitorViolation> out;
  for (std::size_t k = 0; k < arc.samples.size(); ++k) {
    const auto& bucket = arc.samples[k];
    if (bucket.empty()) continue;
    ExtendedNonneg prev = V(bucket.front().x);
    for (std::size_t s = 1; s < bucket.size(); ++s) {
      const ExtendedNonneg cur = V(bucket[s].x);
      if (prev.is_finite()) {
        const double growth = cur.value() - prev.value();
        if (growth > tol) out.push_back({k, s, bucket[s].t, growth});
      }
      prev = cur;
    }
  }
  return out;
}

std::vector<MonitorViolation> monitor_jump_decrease(const HybridArc& arc, const ArcPotential& V,
                                                    const ArcScalar& delta, double tol) {
  std::vector<MonitorViolation> out;
  for (std::size_t k = 0; k < arc.jumps.size(); ++k) {
    const auto& jr = arc.jumps[k];
    const ExtendedNonneg before = V(jr.before);
    if (before.is_infinite()) continue;
    const ExtendedNonneg after = V(jr.after);
    const double bound = before.value() - delta(jr.before) + tol;
    if (after.value() > bound) out.push_back({k, k, jr.t, after.value() - bound});
  }
  return out;
}

}  // namespace synergy
