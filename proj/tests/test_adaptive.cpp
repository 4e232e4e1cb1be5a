#include <doctest.h>

#include <cmath>

#include "synergy/adaptive.hpp"
#include "synergy/obstacle_world.hpp"
#include "synergy/oracles.hpp"
#include "synergy/property_suite.hpp"

using namespace synergy;
namespace ob = synergy::obstacle;

namespace {

Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

Mat general_gain() {
  Mat G(2, 2);
  G << 2.0, 0.6, 0.6, 1.2;
  return G;
}

// x' = u + theta on R^2 with a single-chart quadratic potential.
AdaptiveDesign linear_design() {
  AdaptiveDesign d;
  d.nominal.state_dim = 1;
  d.nominal.kappa = [](const Vec& x, const Vec&) { return Vec(-x); };
  d.nominal.potential = [](const Vec& x, const Vec&) { return ExtendedNonneg(0.5 * x.squaredNorm()); };
  d.nominal.candidates = [](const Vec&, const Vec&) { return std::vector<Vec>{Vec::Zero(1)}; };
  d.nominal.flow = [](const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
  d.nominal.delta = [](const Vec&, const Vec&) { return 1.0; };
  d.plant.state_dim = 2;
  d.plant.input_dim = 2;
  d.plant.param_dim = 2;
  d.plant.input_matrix = [](const Vec&, const Vec&) { return Mat(Mat::Identity(2, 2)); };
  d.plant.disturbance_matrix = d.plant.input_matrix;
  d.plant.matched_uncertainty = d.plant.input_matrix;
  d.grad_x_V0 = [](const Vec& x, const Vec&) { return x; };
  return d;
}

Vec xc1(double q, const Vec& th) { return (Vec(3) << q, th).finished(); }

}  // namespace

TEST_CASE("projection indicator") {
  const ParamBall ball;
  CHECK(p_indicator(v2(0, 0), ball) == doctest::Approx(-1.0 / 3.0));
  CHECK(p_indicator(v2(0.6, 0.8), ball) == doctest::Approx(0.0));
  CHECK(p_indicator(v2(0, 2), ball) == doctest::Approx(1.0));
  CHECK(p_gradient(v2(1, 0), ball).isApprox(v2(2.0 / 3.0, 0)));
}

TEST_CASE("projection operator") {
  const ParamBall ball;
  CHECK(proj(v2(3, -4), v2(0, 0), ball) == v2(3, -4));
  CHECK(proj(v2(1, 0), v2(2, 0), ball).norm() == doctest::Approx(0.0));
  CHECK(proj(v2(0, 1), v2(2, 0), ball) == v2(0, 1));
  CHECK(proj(v2(-1, 0), v2(2, 0), ball) == v2(-1, 0));
  // halfway through the margin only half of the outward component is removed
  const Vec th = v2(std::sqrt(2.5), 0);
  CHECK(proj(v2(1, 0), th, ball)[0] == doctest::Approx(0.5));
}

TEST_CASE("parameter ball validation") {
  ParamBall ball;
  CHECK_NOTHROW(ball.validate());
  CHECK(ball.scalar_gain());
  ball.Gamma1 = general_gain();
  CHECK_NOTHROW(ball.validate());
  CHECK_FALSE(ball.scalar_gain());
  ball.Gamma1 << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(ball.validate(), std::invalid_argument);
  ball = ParamBall{};
  ball.eps = 0.0;
  CHECK_THROWS_AS(ball.validate(), std::invalid_argument);
  ball = ParamBall{};
  ball.Gamma1 << 1.0, 0.1, 0.0, 1.0;
  CHECK_THROWS_AS(ball.validate(), std::invalid_argument);
}

TEST_CASE("estimate flow") {
  const AdaptiveDesign d = linear_design();
  CHECK(theta_hat_flow(Vec::Zero(2), Vec::Zero(1), v2(0.3, 0), d.plant, d.ball, d.grad_x_V0).norm() == 0.0);
  const Vec x = v2(0.4, -0.7);
  CHECK(theta_hat_flow(x, Vec::Zero(1), v2(0.1, 0.2), d.plant, d.ball, d.grad_x_V0) == x);
  // outward drive on the outer boundary has no radial component
  const Vec th = v2(0, 2);
  const Vec flow = theta_hat_flow(v2(0.3, 1.0), Vec::Zero(1), th, d.plant, d.ball, d.grad_x_V0);
  CHECK(flow.dot(th.normalized()) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("metric projection and robust gap") {
  AdaptiveDesign d = linear_design();
  const Vec x = v2(0.5, 0.5);
  CHECK(robust_gap_min(d, x, xc1(0, v2(0.3, 0.4))) == controller_gap(d.nominal, x, Vec::Zero(1)));
  CHECK(robust_gap_min(d, x, xc1(0, v2(2, 0))).value() == doctest::Approx(0.5));

  d.ball.Gamma1 = 2.0 * Mat::Identity(2, 2);
  CHECK(metric_projection(v2(0, 3), d.ball).dist_sq == doctest::Approx(2.0));

  d.ball.Gamma1 = general_gain();
  for (const Vec& th : {v2(1.5, 0.3), v2(-0.2, -1.9), v2(0.9, 0.9), v2(0.1, 0.2)}) {
    const MetricProjection mp = metric_projection(th, d.ball);
    CHECK(mp.point.norm() <= d.ball.theta0 + 1e-12);
    CHECK(mp.dist_sq == doctest::Approx(oracle::grid_dist_sq(th, d.ball)).epsilon(1e-3));
    CHECK(robust_gap_min(d, x, xc1(0, th)).value() ==
          doctest::Approx(oracle::grid_robust_gap(d, x, xc1(0, th)).value()).epsilon(1e-3));
  }
}

TEST_CASE("estimate reset") {
  const ParamBall ball;
  CHECK(g_hat(v2(0.3, 0.4), ball) == v2(0.3, 0.4));
  CHECK(g_hat(v2(2, 0), ball).isApprox(v2(1, 0)));
  ParamBall general;
  general.Gamma1 = general_gain();
  for (const Vec& th : {v2(1.5, 0.3), v2(-0.2, -1.9), v2(0.3, 0.3)}) {
    const double best = oracle::grid_reset_max(th, general).value;
    CHECK(oracle::reset_objective(g_hat(th, general), th, general) >= best - 1e-2);
  }
}

TEST_CASE("adaptive lift") {
  const AdaptiveDesign d = linear_design();
  const RobustController rc = lift_adaptive(d);
  const Vec x = v2(0.2, -0.1);

  CHECK(rc.data.kappa(x, xc1(0, v2(0, 0))) == d.nominal.kappa(x, Vec::Zero(1)));
  CHECK(rc.data.kappa(x, xc1(0, v2(0.3, 0.1))).isApprox(-x - v2(0.3, 0.1)));
  CHECK(rc.potential_family(x, xc1(0, v2(0.3, 0.1)), v2(0.3, 0.1)) == d.nominal.potential(x, Vec::Zero(1)));
  CHECK(rc.potential_family(x, xc1(0, v2(0, 0)), v2(0.6, 0.8)).value() ==
        doctest::Approx(d.nominal.potential(x, Vec::Zero(1)).value() + 0.5));

  const Vec after = rc.data.jump_override(x, xc1(0, v2(2, 0)));
  CHECK(after[0] == 0.0);
  CHECK(after.tail(2).isApprox(v2(1, 0)));
  CHECK(rc.data.state_dim == 3);
  CHECK(rc.data.flow(x, xc1(0, v2(0, 0))).tail(2) == x);
}

TEST_CASE("finite-difference Jacobian") {
  const StateFn linear = [](const Vec& x, const Vec&) { return Vec((Mat(2, 3) << 1, 2, 3, -4, 5, 0.5).finished() * x); };
  const Mat J = jac_kappa1(linear, (Vec(3) << 0.1, -2, 3).finished(), Vec::Zero(1));
  CHECK((J - (Mat(2, 3) << 1, 2, 3, -4, 5, 0.5).finished()).cwiseAbs().maxCoeff() <= 1e-9);

  const StateFn constant = [](const Vec&, const Vec&) { return v2(1, 2); };
  CHECK(jac_kappa1(constant, v2(3, 4), Vec::Zero(1)).cwiseAbs().maxCoeff() == 0.0);

  const StateFn singular = [](const Vec& x, const Vec&) {
    if (x[0] > 0.0) throw ob::ChartSingular("probe");
    return x;
  };
  CHECK_THROWS_AS(jac_kappa1(singular, v2(0, 0), Vec::Zero(1)), NonFiniteJacobian);
  const StateFn blowup = [](const Vec& x, const Vec&) { return Vec(x.array().log()); };
  CHECK_THROWS_AS(jac_kappa1(blowup, v2(0, 1), Vec::Zero(1)), NonFiniteJacobian);
}

TEST_CASE("backstepping terms") {
  const AdaptiveDesign d = linear_design();
  const BackstepGains gains;
  const KappaJacobian fd;
  const Vec x = v2(0.3, -0.4);
  const Vec c1 = xc1(0, v2(0.2, 0.1));
  const Vec k1 = kappa1(d, x, c1);
  auto xc2 = [&](const Vec& u) { return (Vec(5) << c1, u).finished(); };

  CHECK(upsilon(d, gains, fd, x, xc2(k1)).isApprox(x));
  CHECK(upsilon(d, gains, fd, v2(0, 0), xc2(kappa1(d, v2(0, 0), c1))).norm() <= 1e-12);

  // Dx kappa1 = -I so upsilon = x + (u - kappa1)
  const Vec u = k1 + v2(0.5, -0.25);
  CHECK(upsilon(d, gains, fd, x, xc2(u)).isApprox(x + v2(0.5, -0.25), 1e-8));

  // all terms by hand: theta_hat inside Omega so Proj is the identity
  const Vec ups = x + (u - k1);
  const Vec expected = -ups - gains.k_u * (u - k1) - x - (u + v2(0.2, 0.1));
  CHECK(f_u(d, gains, fd, x, xc2(u)).isApprox(expected, 1e-8));

  KappaJacobian analytic;
  analytic.dx = [](const Vec&, const Vec&) { return Mat(-Mat::Identity(2, 2)); };
  CHECK(f_u(d, gains, analytic, x, xc2(u)).isApprox(expected, 1e-12));
}

TEST_CASE("shrinkage onto the backstepping manifold") {
  // damping isolated: x = 0 and theta_hat = 0 leave only -k_u (u - kappa1) + Dk1 u
  AdaptiveDesign d = linear_design();
  BackstepGains gains;
  gains.k_u = 3.0;
  KappaJacobian zero;
  zero.dx = [](const Vec&, const Vec&) { return Mat(Mat::Zero(2, 2)); };
  const Vec c2 = (Vec(5) << 0, 0, 0, 0.4, -0.2).finished();
  CHECK(f_u(d, gains, zero, v2(0, 0), c2).isApprox(-3.0 * v2(0.4, -0.2)));
}

TEST_CASE("backstepping lift") {
  const AdaptiveDesign d = linear_design();
  const BackstepGains gains;
  const RobustController rc = lift_backstep(d, gains, KappaJacobian{});
  const Vec x = v2(0.3, -0.4);
  const Vec c1 = xc1(0, v2(2, 0));
  const Vec k1 = kappa1(d, x, c1);
  auto c2 = [&](const Vec& u) { return (Vec(5) << c1, u).finished(); };

  CHECK(rc.data.kappa(x, c2(v2(7, 8))) == v2(7, 8));
  CHECK(rc.data.gap_override(x, c2(k1)) == robust_gap_min(d, x, c1));
  CHECK(rc.data.gap_override(x, c2(k1 + v2(0.2, 0))).value() ==
        doctest::Approx(robust_gap_min(d, x, c1).value() + 0.02));

  const Vec after = rc.data.jump_override(x, c2(k1 + v2(1, 1)));
  CHECK(after.head(3).tail(2).isApprox(v2(1, 0)));
  CHECK(after.tail(2) == kappa1(d, x, after.head(3)));

  CHECK(rc.potential_family(x, c2(k1 + v2(0.2, 0)), v2(1, 0)).value() ==
        doctest::Approx(lift_adaptive(d).potential_family(x, c1, v2(1, 0)).value() + 0.02));

  BackstepGains bad;
  bad.k_u = 0.0;
  CHECK_THROWS_AS(lift_backstep(d, bad, KappaJacobian{}), std::invalid_argument);
}

TEST_CASE("flowing nominal controller states need an analytic Jacobian") {
  AdaptiveDesign d = linear_design();
  d.nominal.flow = [](const Vec&, const Vec&) { return Vec(Vec::Ones(1)); };
  const RobustController rc = lift_backstep(d, BackstepGains{}, KappaJacobian{});
  const Vec c2 = (Vec(5) << 0, 0, 0, 0, 0).finished();
  CHECK_THROWS_AS(rc.data.flow(v2(1, 1), c2), std::logic_error);

  KappaJacobian jac;
  jac.dxc = [](const Vec&, const Vec&) { return Mat(Mat::Ones(2, 1)); };
  const RobustController rc2 = lift_backstep(d, BackstepGains{}, jac);
  const Vec with = rc2.data.flow(v2(1, 1), c2);
  d.nominal.flow = [](const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
  const Vec without = lift_backstep(d, BackstepGains{}, KappaJacobian{}).data.flow(v2(1, 1), c2);
  CHECK((with.tail(2) - without.tail(2)).isApprox(v2(1, 1), 1e-6));
}

TEST_CASE("input tracks kappa1 along the obstacle flow") {
  ob::ScenarioParams params;
  params.theta = v2(0.3, -0.2);
  const ob::Scenario sc = ob::make_scenario(ob::ControllerKind::backstep, 1, {}, params);
  Vec s(8);
  s << ob::psi(v2(1.8, 0.9), sc.obstacle).to_vec(), 1.0, params.theta, v2(0.4, 0.1);
  const Vec x = s.head(3);
  const Vec c1 = s.segment(3, 3);
  const Vec u = s.tail(2);
  const Vec ds = sc.system.flow_map(s);

  const double h = 1e-6;
  auto k1_at = [&](const Vec& st) { return kappa1(sc.design, st.head(3), st.segment(3, 3)); };
  const Vec dk1 = (k1_at(s + h * ds) - k1_at(s - h * ds)) / (2 * h);
  const Vec grad = ob::grad_V0(x, 1, sc.obstacle);
  const Vec expected = ds.tail(2) + sc.gains.k_u * (u - kappa1(sc.design, x, c1)) +
                       sc.gains.Gamma2 * ob::d_psi_at(x, sc.obstacle).transpose() * grad;
  CHECK((dk1 - expected).norm() <= 1e-5 * std::max(1.0, expected.norm()));
}

TEST_CASE("upsilon with a finite-difference Jacobian on the obstacle") {
  const ob::Scenario sc = ob::make_scenario(ob::ControllerKind::backstep, -1);
  const Vec x = ob::psi(v2(2.5, -1.0), sc.obstacle).to_vec();
  const Vec c2 = (Vec(5) << -1, 0.2, 0.5, 0.3, -0.6).finished();
  KappaJacobian analytic;
  analytic.dx = [&](const Vec& xx, const Vec& c) { return Mat(ob::dx_kappa0(xx, static_cast<int>(c[0]), sc.obstacle)); };
  const Vec a = upsilon(sc.design, sc.gains, analytic, x, c2);
  const Vec b = upsilon(sc.design, sc.gains, KappaJacobian{}, x, c2);
  CHECK(oracle::relative_error(a, b) <= 1e-6);
}

TEST_CASE("projection properties on seeded samples") {
  CHECK(props::proj_inequality(11, 2000).passed());
  CHECK(props::proj_lipschitz(11, 2000).passed());
  CHECK_FALSE(props::proj_inequality(11, 2000, props::Mutation::proj_sign_flip).passed());
  CHECK(props::gap_ordering(11, 200).passed());
  CHECK(props::reset_decrease(11, 200).passed());
  CHECK(props::backstep_gap_identity(11, 200).passed());
  CHECK(props::robust_gap_oracle(11, 50).passed());
  CHECK(props::g_hat_oracle(11, 50).passed());
}
