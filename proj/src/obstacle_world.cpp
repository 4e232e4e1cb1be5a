#include "synergy/obstacle_world.hpp"

#include <cmath>

namespace synergy::obstacle {

void ObstacleDisk::validate() const {
  if (!(radius > 0.0)) throw std::invalid_argument("obstacle radius must be positive");
  if (!(center.norm() > radius)) throw std::invalid_argument("the origin must lie outside the obstacle");
}

Vec CylinderPoint::to_vec() const { return Eigen::Vector3d(x1, s[0], s[1]); }

CylinderPoint CylinderPoint::from_vec(const Vec& x) { return {x[0], Vec2(x[1], x[2])}; }

int chart_sign(ChartIndex q) { return static_cast<int>(q); }

ChartIndex chart_from_value(double v) {
  if (v == 1.0) return ChartIndex::plus;
  if (v == -1.0) return ChartIndex::minus;
  throw std::invalid_argument("chart index must be -1 or +1");
}

CylinderPoint psi(const Vec2& z, const ObstacleDisk& obs) {
  const Vec2 w = z - obs.center;
  const double n = w.norm();
  if (!(n > obs.radius + kGuardBand)) throw InsideObstacle("point lies inside the obstacle");
  return {std::log(n - obs.radius), w / n};
}

Vec2 psi_inv(const CylinderPoint& x, const ObstacleDisk& obs) {
  return obs.center + (std::exp(x.x1) + obs.radius) * x.s;
}

Vec2 psi_inv(const Vec& x, const ObstacleDisk& obs) { return psi_inv(CylinderPoint::from_vec(x), obs); }

Mat32 d_psi(const Vec2& z, const ObstacleDisk& obs) {
  const Vec2 w = z - obs.center;
  const double n = w.norm();
  if (!(n > obs.radius + kGuardBand)) throw InsideObstacle("point lies inside the obstacle");
  const Vec2 w_hat = w / n;
  Mat32 J;
  J.row(0) = w.transpose() / (n * (n - obs.radius));
  J.bottomRows<2>() = (Eigen::Matrix2d::Identity() - w_hat * w_hat.transpose()) / n;
  return J;
}

Mat32 d_psi_at(const Vec& x, const ObstacleDisk& obs) {
  const Vec2 s(x[1], x[2]);
  const double rho = std::exp(x[0]) + obs.radius;
  Mat32 J;
  J.row(0) = std::exp(-x[0]) * s.transpose();
  J.bottomRows<2>() = (Eigen::Matrix2d::Identity() - s * s.transpose()) / rho;
  return J;
}

Vec2 phi_q(const Vec& x, int q) {
  const double d = 1.0 - q * x[2];
  if (!(d > kGuardBand)) throw ChartSingular("state lies on the chart singularity");
  return {x[0], x[1] / d};
}

Mat23 d_phi_q(const Vec& x, int q) {
  const double d = 1.0 - q * x[2];
  if (!(d > kGuardBand)) throw ChartSingular("state lies on the chart singularity");
  Mat23 J;
  J << 1.0, 0.0, 0.0, 0.0, 1.0 / d, q * x[1] / (d * d);
  return J;
}

Vec2 target_chart(const ObstacleDisk& obs, int q) { return phi_q(psi(Vec2::Zero(), obs).to_vec(), q); }

ExtendedNonneg V0(const Vec& x, int q, const ObstacleDisk& obs) {
  if (!(1.0 - q * x[2] > kGuardBand)) return ExtendedNonneg::infinity();
  return ExtendedNonneg(0.5 * (phi_q(x, q) - target_chart(obs, q)).squaredNorm());
}

Vec grad_V0(const Vec& x, int q, const ObstacleDisk& obs) {
  return d_phi_q(x, q).transpose() * (phi_q(x, q) - target_chart(obs, q));
}

Vec2 kappa0(const Vec& x, int q, const ObstacleDisk& obs) {
  return -d_psi_at(x, obs).transpose() * grad_V0(x, q, obs);
}

Mat23 dx_kappa0(const Vec& x, int q, const ObstacleDisk& obs) {
  const double d = 1.0 - q * x[2];
  if (!(d > kGuardBand)) throw ChartSingular("state lies on the chart singularity");
  const Vec2 target = target_chart(obs, q);
  const Vec2 s(x[1], x[2]);
  const double a = std::exp(-x[0]);
  const double E = std::exp(x[0]);
  const double rho = E + obs.radius;
  const double e1 = x[0] - target[0];
  const double e2 = x[1] / d - target[1];
  const double d2 = d * d;
  const double d3 = d2 * d;
  const Vec2 gs(e2 / d, q * x[1] * e2 / d2);
  const Eigen::Matrix2d P = Eigen::Matrix2d::Identity() - s * s.transpose();

  // d gs / d(x2, x3)
  Eigen::Matrix2d dgs;
  dgs << 1.0 / d2, q * x[1] / d3 + q * e2 / d2,
      q * e2 / d2 + q * x[1] / d3, x[1] * x[1] / (d2 * d2) + 2.0 * x[1] * e2 / d3;

  Mat23 J;
  J.col(0) = -(a * (1.0 - e1) * s - (E / (rho * rho)) * P * gs);
  for (int k = 0; k < 2; ++k) {
    const Vec2 ek = Vec2::Unit(k);
    const Vec2 dP_gs = -(ek * s.dot(gs) + s * gs[k]);
    J.col(k + 1) = -(a * e1 * ek + (dP_gs + P * dgs.col(k)) / rho);
  }
  return J;
}

void normalize_cylinder(Vec& x) {
  const double n = std::hypot(x[1], x[2]);
  x[1] /= n;
  x[2] /= n;
}

AffinePlant obstacle_plant(const ObstacleDisk& obs) {
  AffinePlant p;
  p.state_dim = 3;
  p.input_dim = 2;
  p.param_dim = 2;
  p.drift = [](const Vec&, const Vec&) { return Vec(Vec::Zero(3)); };
  p.input_matrix = [obs](const Vec& x, const Vec&) { return Mat(d_psi_at(x, obs)); };
  p.disturbance_matrix = p.input_matrix;
  p.matched_uncertainty = [](const Vec&, const Vec&) { return Mat(Mat::Identity(2, 2)); };
  p.normalize = normalize_cylinder;
  return p;
}

ScalarFn constant_delta(double value) {
  return [value](const Vec&, const Vec&) { return value; };
}

namespace {

int q_of(const Vec& xc) { return chart_sign(chart_from_value(xc[0])); }

std::vector<std::pair<Vec, Vec>> probe_states() {
  std::vector<std::pair<Vec, Vec>> probes;
  for (double x1 : {-2.0, 0.0, 1.5}) {
    for (int k = 0; k < 8; ++k) {
      const double a = 2.0 * M_PI * k / 8.0;
      for (double q : {-1.0, 1.0})
        probes.emplace_back(Eigen::Vector3d(x1, std::cos(a), std::sin(a)), Vec::Constant(1, q));
    }
  }
  return probes;
}

}  // namespace

ControllerData build_nominal_controller(const ObstacleDisk& obs, ScalarFn delta) {
  obs.validate();
  ControllerData c;
  c.state_dim = 1;
  c.kappa = [obs](const Vec& x, const Vec& xc) { return Vec(kappa0(x, q_of(xc), obs)); };
  c.potential = [obs](const Vec& x, const Vec& xc) { return V0(x, q_of(xc), obs); };
  c.candidates = [](const Vec&, const Vec&) {
    return std::vector<Vec>{Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
  };
  c.flow = [](const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
  c.delta = std::move(delta);
  validate_delta(c, probe_states());
  return c;
}

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::nominal: return "nominal";
    case ControllerKind::adaptive: return "adaptive";
    case ControllerKind::backstep: return "backstep";
  }
  return "unknown";
}

ControllerKind parse_controller_kind(const std::string& s) {
  if (s == "nominal") return ControllerKind::nominal;
  if (s == "adaptive") return ControllerKind::adaptive;
  if (s == "backstep") return ControllerKind::backstep;
  throw std::invalid_argument("unknown controller kind '" + s + "'");
}

std::string to_string(InitialInput p) { return p == InitialInput::kappa1 ? "kappa1" : "zero"; }

InitialInput parse_initial_input(const std::string& s) {
  if (s == "kappa1") return InitialInput::kappa1;
  if (s == "zero") return InitialInput::zero;
  throw std::invalid_argument("unknown initial input policy '" + s + "'");
}

SolverConfig ScenarioParams::default_solver() {
  SolverConfig cfg;
  cfg.t_max = 10.0;
  cfg.j_max = 1000;
  return cfg;
}

int Scenario::chart(const Vec& s) const { return q_of(s.segment(plant_dim, 1)); }

Vec2 Scenario::position(const Vec& s) const { return psi_inv(plant_state(s), obstacle); }

Vec2 Scenario::theta_hat(const Vec& s) const {
  if (kind == ControllerKind::nominal) return Vec2::Zero();
  return s.segment(plant_dim + 1, 2);
}

Vec2 Scenario::input(const Vec& s) const { return controller.kappa(plant_state(s), controller_state(s)); }

ExtendedNonneg Scenario::true_potential(const Vec& s) const {
  return potential_family(plant_state(s), controller_state(s), params.theta);
}

ExtendedNonneg Scenario::robust_gap(const Vec& s) const {
  return controller_gap(controller, plant_state(s), controller_state(s));
}

double Scenario::delta(const Vec& s) const { return controller.delta(plant_state(s), controller_state(s)); }

Scenario make_scenario(ControllerKind kind, int q0, const ObstacleDisk& obs, const ScenarioParams& params) {
  if (q0 != 1 && q0 != -1) throw std::invalid_argument("q0 must be -1 or +1");
  if (params.theta.size() != 2 || params.theta_hat0.size() != 2)
    throw std::invalid_argument("theta and theta_hat0 must be 2-vectors");

  Scenario sc;
  sc.kind = kind;
  sc.q0 = q0;
  sc.obstacle = obs;
  sc.params = params;

  sc.design.nominal = build_nominal_controller(obs, constant_delta(params.delta));
  sc.design.plant = obstacle_plant(obs);
  sc.design.ball = ParamBall{params.theta0, params.eps, params.Gamma1};
  sc.design.grad_x_V0 = [obs](const Vec& x, const Vec& xc) { return grad_V0(x, q_of(xc), obs); };
  sc.gains = BackstepGains{params.Gamma2, params.k_u};

  const Vec x0 = psi(params.z_init, obs).to_vec();
  const Vec q = Vec::Constant(1, static_cast<double>(q0));

  switch (kind) {
    case ControllerKind::nominal: {
      sc.controller = sc.design.nominal;
      sc.potential_family = [V = sc.design.nominal.potential](const Vec& x, const Vec& xc, const Vec&) {
        return V(x, xc);
      };
      sc.initial_state.resize(4);
      sc.initial_state << x0, q;
      break;
    }
    case ControllerKind::adaptive: {
      RobustController rc = lift_adaptive(sc.design);
      sc.controller = std::move(rc.data);
      sc.potential_family = std::move(rc.potential_family);
      sc.initial_state.resize(6);
      sc.initial_state << x0, q, params.theta_hat0;
      break;
    }
    case ControllerKind::backstep: {
      KappaJacobian jac;
      jac.dx = [obs](const Vec& x, const Vec& xc1) { return Mat(dx_kappa0(x, q_of(xc1), obs)); };
      RobustController rc = lift_backstep(sc.design, sc.gains, jac);
      sc.controller = std::move(rc.data);
      sc.potential_family = std::move(rc.potential_family);
      Vec xc1(3);
      xc1 << q, params.theta_hat0;
      const Vec u0 = params.u0 == InitialInput::kappa1 ? kappa1(sc.design, x0, xc1) : Vec(Vec::Zero(2));
      sc.initial_state.resize(8);
      sc.initial_state << x0, xc1, u0;
      break;
    }
  }
  sc.system = build_closed_loop(sc.design.plant.as_plant(), params.theta, sc.controller);
  return sc;
}

}  // namespace synergy::obstacle
