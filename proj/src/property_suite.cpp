#include "synergy/property_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "synergy/obstacle_world.hpp"
#include "synergy/oracles.hpp"

namespace synergy::props {

namespace obs = synergy::obstacle;

namespace {

using V2 = Eigen::Vector2d;

const double kTwoPi = 2.0 * std::acos(-1.0);

class Sampler {
 public:
  Sampler(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt)};
    rng_.seed(seq);
  }

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
  int sign() { return coin() ? 1 : -1; }

  V2 in_disk(double R) {
    const double r = R * std::sqrt(uniform(0.0, 1.0));
    const double a = uniform(0.0, kTwoPi);
    return {r * std::cos(a), r * std::sin(a)};
  }

  V2 on_circle(double R) {
    const double a = uniform(0.0, kTwoPi);
    return {R * std::cos(a), R * std::sin(a)};
  }

  /// SPD 2x2 with eigenvalues in [lo, hi]; a scalar multiple of I with probability p_scalar.
  Mat spd(double lo, double hi, double p_scalar) {
    if (coin(p_scalar)) return uniform(lo, hi) * Mat::Identity(2, 2);
    const double a = uniform(0.0, kTwoPi);
    Eigen::Matrix2d Q;
    Q << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const Eigen::Vector2d ev(uniform(lo, hi), uniform(lo, hi));
    Eigen::Matrix2d S = Q * ev.asDiagonal() * Q.transpose();
    S = 0.5 * (S + S.transpose()).eval();
    return S;
  }

  /// Ambient cylinder state with 1 - q x3 >= min_d.
  Vec cylinder_state(int q, double min_d) {
    while (true) {
      const V2 s = on_circle(1.0);
      if (1.0 - q * s[1] < min_d) continue;
      return Eigen::Vector3d(uniform(-2.0, 2.0), s[0], s[1]);
    }
  }

 private:
  std::mt19937_64 rng_;
};

Vec proj_under(Mutation m, const Vec& eta, const Vec& theta_hat, const ParamBall& ball) {
  if (m != Mutation::proj_sign_flip) return proj(eta, theta_hat, ball);
  const double p = p_indicator(theta_hat, ball);
  const Vec grad = p_gradient(theta_hat, ball);
  const double along = grad.dot(eta);
  if (p <= 0.0 || along <= 0.0) return eta;
  return eta + (p * along / grad.squaredNorm()) * grad;
}

ParamBall random_ball(Sampler& S) {
  ParamBall b;
  b.theta0 = S.uniform(0.5, 1.5);
  b.eps = S.uniform(0.5, 1.0);
  b.Gamma1 = S.spd(1.0, 3.0, 0.25);
  return b;
}

obs::ScenarioParams params_with(const ParamBall& ball, const Mat& Gamma2 = Mat::Identity(2, 2)) {
  obs::ScenarioParams p;
  p.theta0 = ball.theta0;
  p.eps = ball.eps;
  p.Gamma1 = ball.Gamma1;
  p.Gamma2 = Gamma2;
  return p;
}

Vec pack_xc1(int q, const Vec& theta_hat) {
  Vec xc1(3);
  xc1 << static_cast<double>(q), theta_hat;
  return xc1;
}

void record(SuiteResult& r, double err, bool failed) {
  ++r.cases;
  r.worst = std::max(r.worst, err);
  if (failed) ++r.failures;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string to_string(Mutation m) {
  switch (m) {
    case Mutation::none: return "none";
    case Mutation::proj_sign_flip: return "proj_sign_flip";
    case Mutation::zero_delta: return "zero_delta";
  }
  return "unknown";
}

Mutation parse_mutation(const std::string& s) {
  if (s == "none") return Mutation::none;
  if (s == "proj_sign_flip") return Mutation::proj_sign_flip;
  if (s == "zero_delta") return Mutation::zero_delta;
  throw std::invalid_argument("unknown mutation '" + s + "'");
}

bool PropertyReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& r) { return r.passed(); });
}

const SuiteResult* PropertyReport::find(const std::string& name) const {
  for (const auto& r : suites)
    if (r.name == name) return &r;
  return nullptr;
}

std::ostream& operator<<(std::ostream& os, const SuiteResult& r) {
  os << (r.passed() ? "PASS " : "FAIL ") << r.name << " cases=" << r.cases << " failures=" << r.failures
     << " worst=" << format_double(r.worst) << " tol=" << format_double(r.tolerance);
  if (!r.detail.empty()) os << " " << r.detail;
  return os;
}

SuiteResult proj_lipschitz(std::uint64_t seed, std::size_t n, Mutation m) {
  Sampler S(seed, 1);
  SuiteResult r;
  r.name = "proj_lipschitz";
  r.tolerance = 10.0;
  std::vector<double> ratios;
  ratios.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    ParamBall ball;
    ball.theta0 = S.uniform(0.5, 1.5);
    ball.eps = S.uniform(0.5, 1.0);
    const Vec th = S.in_disk(ball.theta0 + ball.eps);
    const Vec eta = S.in_disk(5.0);
    const double step = S.uniform(1e-9, 1e-3);
    const double split = S.uniform(0.0, 1.0);
    const Vec th2 = th + split * step * Vec(S.on_circle(1.0));
    const Vec eta2 = eta + (1.0 - split) * step * Vec(S.on_circle(1.0));
    const double num = (proj_under(m, eta, th, ball) - proj_under(m, eta2, th2, ball)).norm();
    ratios.push_back(num / ((eta - eta2).norm() + (th - th2).norm()));
  }
  const std::size_t half = n / 2;
  const double L = *std::max_element(ratios.begin(), ratios.begin() + static_cast<long>(std::max<std::size_t>(half, 1)));
  for (std::size_t k = half; k < n; ++k) record(r, ratios[k] / std::max(L, 1.0), !(ratios[k] <= r.tolerance * L));
  r.cases = n;
  r.detail = "L=" + format_double(L);
  if (!std::isfinite(L)) ++r.failures;
  return r;
}

SuiteResult proj_inequality(std::uint64_t seed, std::size_t n, Mutation m) {
  Sampler S(seed, 2);
  SuiteResult r;
  r.name = "proj_inequality";
  r.tolerance = 1e-12;
  std::size_t active = 0;
  for (std::size_t k = 0; k < n; ++k) {
    ParamBall ball;
    ball.theta0 = S.uniform(0.5, 1.5);
    ball.eps = S.uniform(0.5, 1.0);
    const Vec theta = S.in_disk(ball.theta0);
    const Vec th = S.in_disk(ball.theta0 + ball.eps);
    const Vec eta = S.in_disk(5.0);
    const Vec p = proj_under(m, eta, th, ball);
    if ((p - eta).norm() > 0.0) ++active;
    const double shortfall = (theta - th).dot(eta) - (theta - th).dot(p);
    record(r, std::max(0.0, shortfall), shortfall > r.tolerance);
  }
  r.detail = "projected=" + std::to_string(active);
  return r;
}

SuiteResult robust_gap_oracle(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 3);
  SuiteResult r;
  r.name = "robust_gap_oracle";
  r.tolerance = 1e-3;
  for (std::size_t k = 0; k < n; ++k) {
    const ParamBall ball = random_ball(S);
    const obs::Scenario sc = obs::make_scenario(obs::ControllerKind::adaptive, 1, {}, params_with(ball));
    const int q = S.sign();
    const Vec x = S.cylinder_state(q, 0.2);
    const Vec xc1 = pack_xc1(q, S.in_disk(ball.theta0 + ball.eps));
    const ExtendedNonneg a = robust_gap_min(sc.design, x, xc1);
    const ExtendedNonneg b = oracle::grid_robust_gap(sc.design, x, xc1);
    const double err = (a.is_finite() && b.is_finite()) ? std::abs(a.value() - b.value()) : (a == b ? 0.0 : INFINITY);
    record(r, err, !(err <= r.tolerance));
  }
  return r;
}

SuiteResult g_hat_oracle(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 4);
  SuiteResult r;
  r.name = "g_hat_oracle";
  r.tolerance = 1e-2;
  for (std::size_t k = 0; k < n; ++k) {
    const ParamBall ball = random_ball(S);
    const Vec th = S.in_disk(ball.theta0 + ball.eps);
    const Vec g = g_hat(th, ball);
    const double value = oracle::reset_objective(g, th, ball);
    const oracle::GridMax best = oracle::grid_reset_max(th, ball);
    const double err = std::abs(best.value - value);
    const bool inside = g.norm() <= ball.theta0 + ball.eps + 1e-12;
    record(r, err, !(err <= r.tolerance) || !inside);
  }
  return r;
}

SuiteResult chart_round_trip(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 5);
  SuiteResult r;
  r.name = "chart_round_trip";
  r.tolerance = 1e-10;
  const obs::ObstacleDisk disk;
  for (std::size_t k = 0; k < n; ++k) {
    const V2 z = disk.center + S.on_circle(disk.radius * 1.001 + S.uniform(0.0, 5.0));
    const double e1 = (obs::psi_inv(obs::psi(z, disk), disk) - z).norm();
    record(r, e1, !(e1 <= r.tolerance));

    const Vec x = Eigen::Vector3d(S.uniform(-5.0, 3.0), 0.0, 0.0);
    obs::CylinderPoint c{x[0], S.on_circle(1.0)};
    const obs::CylinderPoint back = obs::psi(obs::psi_inv(c, disk), disk);
    const double e2 = std::max(std::abs(back.x1 - c.x1), (back.s - c.s).norm());
    record(r, e2, !(e2 <= r.tolerance));
  }
  return r;
}

SuiteResult analytic_jacobians(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 6);
  SuiteResult r;
  r.name = "analytic_jacobians";
  r.tolerance = 1e-6;
  const obs::ObstacleDisk disk;
  const obs::Scenario sc = obs::make_scenario(obs::ControllerKind::adaptive, 1);
  auto check = [&](const Mat& analytic, const Mat& numeric) {
    const double e = oracle::relative_error(analytic, numeric);
    record(r, e, !(e <= r.tolerance));
  };
  for (std::size_t k = 0; k < n; ++k) {
    const V2 z = disk.center + S.on_circle(disk.radius + S.uniform(0.05, 4.0));
    const double hz = 1e-6 * std::max(1.0, z.norm());
    check(obs::d_psi(z, disk),
          oracle::central_jacobian([&](const Vec& zz) { return obs::psi(zz, disk).to_vec(); }, Vec(z), hz));

    const int q = S.sign();
    const Vec x = S.cylinder_state(q, 0.2);
    const double h = 1e-6 * std::max(1.0, x.norm());
    check(obs::d_psi_at(x, disk), obs::d_psi(obs::psi_inv(x, disk), disk));
    check(obs::d_phi_q(x, q), oracle::central_jacobian([&](const Vec& xx) { return Vec(obs::phi_q(xx, q)); }, x, h));
    check(obs::grad_V0(x, q, disk).transpose(),
          oracle::central_jacobian([&](const Vec& xx) { return Vec::Constant(1, obs::V0(xx, q, disk).value()); }, x, h));
    const Mat dk0 = obs::dx_kappa0(x, q, disk);
    check(dk0, oracle::central_jacobian([&](const Vec& xx) { return Vec(obs::kappa0(xx, q, disk)); }, x, h));

    const Vec xc1 = pack_xc1(q, S.in_disk(2.0));
    check(dk0, jac_kappa1([&](const Vec& xx, const Vec& cc) { return kappa1(sc.design, xx, cc); }, x, xc1));
  }
  return r;
}

SuiteResult nominal_flow_decrease(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 7);
  SuiteResult r;
  r.name = "nominal_flow_decrease";
  r.tolerance = 1e-5;
  const obs::ObstacleDisk disk;
  for (std::size_t k = 0; k < n; ++k) {
    const int q = S.sign();
    const Vec x = S.cylinder_state(q, 0.2);
    const Vec grad = obs::grad_V0(x, q, disk);
    const Vec v = obs::d_psi_at(x, disk) * obs::kappa0(x, q, disk);
    const double analytic = -(obs::d_psi_at(x, disk).transpose() * grad).squaredNorm();
    const double h = 1e-6 / std::max(1.0, v.norm());
    const double numeric = (obs::V0(x + h * v, q, disk).value() - obs::V0(x - h * v, q, disk).value()) / (2.0 * h);
    const double e = std::abs(analytic - numeric) / std::max(std::abs(numeric), 1.0);
    record(r, e, !(e <= r.tolerance) || analytic > 0.0);
  }
  return r;
}

SuiteResult gap_ordering(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 8);
  SuiteResult r;
  r.name = "gap_ordering";
  r.tolerance = 1e-12;
  const obs::ObstacleDisk disk;
  for (std::size_t k = 0; k < n; ++k) {
    const ParamBall ball = random_ball(S);
    const obs::Scenario sc = obs::make_scenario(obs::ControllerKind::adaptive, 1, disk, params_with(ball));
    const int q = S.sign();
    const Vec x = S.cylinder_state(q, 0.2);
    const Vec th = S.in_disk(ball.theta0 + ball.eps);
    const Vec theta = S.in_disk(ball.theta0);
    const Vec xc1 = pack_xc1(q, th);
    const double Vq = obs::V0(x, q, disk).value();
    const double Vmin = std::min(Vq, obs::V0(x, -q, disk).value());
    const Vec d = theta - th;
    const double true_gap = Vq + 0.5 * d.dot(ball.Gamma1.inverse() * d) - Vmin;
    const double excess = robust_gap_min(sc.design, x, xc1).value() - true_gap;
    record(r, std::max(0.0, excess), excess > r.tolerance);
  }
  return r;
}

SuiteResult reset_decrease(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 9);
  SuiteResult r;
  r.name = "reset_decrease";
  r.tolerance = 1e-9;
  for (std::size_t k = 0; k < n; ++k) {
    const ParamBall ball = random_ball(S);
    const obs::Scenario sc = obs::make_scenario(obs::ControllerKind::adaptive, 1, {}, params_with(ball));
    const int q = S.sign();
    const Vec x = S.cylinder_state(q, 0.2);
    const Vec before = pack_xc1(q, S.in_disk(ball.theta0 + ball.eps));
    const Vec theta = S.in_disk(ball.theta0);
    const Vec after = controller_jump(sc.controller, x, before);
    const double drop = sc.potential_family(x, before, theta).value() - sc.potential_family(x, after, theta).value();
    const double shortfall = robust_gap_min(sc.design, x, before).value() - drop;
    record(r, std::max(0.0, shortfall), shortfall > r.tolerance);
  }
  return r;
}

SuiteResult backstep_gap_identity(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 10);
  SuiteResult r;
  r.name = "backstep_gap_identity";
  r.tolerance = 1e-12;
  for (std::size_t k = 0; k < n; ++k) {
    const ParamBall ball = random_ball(S);
    const Mat G2 = S.spd(0.5, 2.0, 0.25);
    const obs::Scenario sc = obs::make_scenario(obs::ControllerKind::backstep, 1, {}, params_with(ball, G2));
    const int q = S.sign();
    const Vec x = S.cylinder_state(q, 0.2);
    const Vec xc1 = pack_xc1(q, S.in_disk(ball.theta0 + ball.eps));
    const Vec u = S.in_disk(3.0);
    Vec xc2(5);
    xc2 << xc1, u;
    const Vec w = u - kappa1(sc.design, x, xc1);
    const double expected = robust_gap_min(sc.design, x, xc1).value() + 0.5 * w.dot(G2.inverse() * w);
    const double got = sc.robust_gap(Vec((Vec(8) << x, xc2).finished())).value();
    const double e = std::abs(got - expected) / std::max(1.0, std::abs(expected));
    const Vec after = controller_jump(sc.controller, x, xc2);
    const Vec du = after.tail(2) - kappa1(sc.design, x, after.head(3));
    const double e_jump = du.cwiseAbs().maxCoeff();
    record(r, std::max(e, e_jump), !(e <= r.tolerance) || e_jump != 0.0);
  }
  return r;
}

SuiteResult candidate_enumeration(std::uint64_t seed, std::size_t n) {
  Sampler S(seed, 11);
  SuiteResult r;
  r.name = "candidate_enumeration";
  for (std::size_t k = 0; k < n; ++k) {
    const int m = S.integer(1, 8);
    const bool ties = S.coin(0.3);
    std::vector<ExtendedNonneg> table(static_cast<std::size_t>(m));
    for (auto& v : table) {
      if (S.coin(0.25)) v = ExtendedNonneg::infinity();
      else v = ExtendedNonneg(ties ? 0.5 * S.integer(0, 3) : S.uniform(0.0, 10.0));
    }
    const int current = S.integer(0, m - 1);

    ControllerData c;
    c.state_dim = 1;
    c.potential = [&table](const Vec&, const Vec& xc) { return table[static_cast<std::size_t>(xc[0])]; };
    std::vector<Vec> cands;
    for (int i = 0; i < m; ++i) cands.push_back(Vec::Constant(1, i));
    c.candidates = [&cands](const Vec&, const Vec&) { return cands; };

    const Vec x = Vec::Zero(1);
    const Vec xc = Vec::Constant(1, current);
    const bool feasible = std::any_of(table.begin(), table.end(), [](const ExtendedNonneg& v) { return v.is_finite(); });
    bool ok = true;
    if (!feasible) {
      try {
        min_over_candidates(c, x, xc);
        ok = false;
      } catch (const InfeasibleC1&) {
      }
      record(r, 0.0, !ok);
      continue;
    }
    const GapReport got = min_over_candidates(c, x, xc);
    const oracle::EnumeratedGap want = oracle::enumerate_gap(table, table[static_cast<std::size_t>(current)], kTieTolerance);
    ok = got.min_V == want.min_V && got.gap == want.gap && got.argmin_index == want.argmin;

    std::vector<Vec> shuffled = cands;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(k));
    ControllerData cp = c;
    cp.candidates = [&shuffled](const Vec&, const Vec&) { return shuffled; };
    const GapReport perm = min_over_candidates(cp, x, xc);
    std::vector<double> a;
    std::vector<double> b;
    for (const Vec& g : got.argmin) a.push_back(g[0]);
    for (const Vec& g : perm.argmin) b.push_back(g[0]);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ok = ok && perm.min_V == got.min_V && perm.gap == got.gap && a == b;
    record(r, 0.0, !ok);
  }
  return r;
}

SuiteResult delta_validation(Mutation m) {
  SuiteResult r;
  r.name = "delta_validation";
  const double delta = m == Mutation::zero_delta ? 0.0 : 1.0;
  try {
    obs::build_nominal_controller({}, obs::constant_delta(delta));
    record(r, 0.0, false);
  } catch (const InvalidController& e) {
    record(r, 0.0, true);
    r.detail = e.what();
  }
  return r;
}

PropertyReport property_suite(std::uint64_t seed, Mutation m) {
  PropertyReport rep;
  rep.seed = seed;
  rep.mutation = m;
  rep.suites.push_back(proj_lipschitz(seed, 10000, m));
  rep.suites.push_back(proj_inequality(seed, 10000, m));
  rep.suites.push_back(robust_gap_oracle(seed));
  rep.suites.push_back(g_hat_oracle(seed));
  rep.suites.push_back(chart_round_trip(seed));
  rep.suites.push_back(analytic_jacobians(seed));
  rep.suites.push_back(nominal_flow_decrease(seed));
  rep.suites.push_back(gap_ordering(seed));
  rep.suites.push_back(reset_decrease(seed));
  rep.suites.push_back(backstep_gap_identity(seed));
  rep.suites.push_back(candidate_enumeration(seed));
  rep.suites.push_back(delta_validation(m));
  return rep;
}

}  // namespace synergy::props
