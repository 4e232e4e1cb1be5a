#include "synergy/adaptive.hpp"

#include <cmath>

namespace synergy {

namespace {

constexpr double kMultiplierBracket = 1e12;
constexpr int kMaxBisections = 200;
constexpr double kBisectionTol = 1e-12;

bool symmetric(const Mat& m) { return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()); }

void require_spd(const Mat& m, const char* name) {
  if (!symmetric(m)) throw std::invalid_argument(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw std::invalid_argument(std::string(name) + " must be positive definite");
}

// v' M^-1 v
double inv_quad(const Eigen::LDLT<Mat>& m, const Vec& v) { return v.dot(m.solve(v)); }

bool all_zero(const Vec& v) { return v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

void ParamBall::validate() const {
  if (!(theta0 > 0.0)) throw std::invalid_argument("theta0 must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  require_spd(Gamma1, "Gamma1");
}

bool ParamBall::scalar_gain() const {
  const double g = Gamma1(0, 0);
  return (Gamma1 - g * Mat::Identity(Gamma1.rows(), Gamma1.cols())).cwiseAbs().maxCoeff() <= 1e-15 * std::abs(g);
}

double p_indicator(const Vec& theta_hat, const ParamBall& ball) {
  return (theta_hat.squaredNorm() - ball.theta0 * ball.theta0) /
         (ball.eps * ball.eps + 2.0 * ball.eps * ball.theta0);
}

Vec p_gradient(const Vec& theta_hat, const ParamBall& ball) {
  return 2.0 * theta_hat / (ball.eps * ball.eps + 2.0 * ball.eps * ball.theta0);
}

Vec proj(const Vec& eta, const Vec& theta_hat, const ParamBall& ball) {
  const double p = p_indicator(theta_hat, ball);
  const Vec grad = p_gradient(theta_hat, ball);
  const double along = grad.dot(eta);
  if (p <= 0.0 || along <= 0.0) return eta;
  return eta - (p * along / grad.squaredNorm()) * grad;
}

MetricProjection metric_projection(const Vec& theta_hat, const ParamBall& ball) {
  const double r = theta_hat.norm();
  if (r <= ball.theta0) return {theta_hat, 0.0};

  if (ball.scalar_gain()) {
    const double gamma = ball.Gamma1(0, 0);
    const double gap = r - ball.theta0;
    return {(ball.theta0 / r) * theta_hat, gap * gap / gamma};
  }

  // theta(lambda) = (I + lambda Gamma1)^-1 theta_hat has decreasing norm in lambda.
  Eigen::SelfAdjointEigenSolver<Mat> es(ball.Gamma1);
  const Mat& Q = es.eigenvectors();
  const Vec& ev = es.eigenvalues();
  const Vec coords = Q.transpose() * theta_hat;
  auto at = [&](double lambda) {
    Vec c = coords;
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] /= 1.0 + lambda * ev[i];
    return Vec(Q * c);
  };

  double lo = 0.0;
  double hi = kMultiplierBracket;
  Vec best = at(hi);
  for (int it = 0; it < kMaxBisections; ++it) {
    const double mid = 0.5 * (lo + hi);
    Vec cand = at(mid);
    const double n = cand.norm();
    if (n <= ball.theta0) {
      hi = mid;
      best = std::move(cand);
      if (ball.theta0 - n <= kBisectionTol) break;
    } else {
      lo = mid;
    }
    if (hi - lo <= kBisectionTol * std::max(1.0, lo)) break;
  }
  const Vec diff = best - theta_hat;
  return {best, diff.dot(ball.Gamma1.ldlt().solve(diff))};
}

Vec g_hat(const Vec& theta_hat, const ParamBall& ball) {
  if (ball.scalar_gain()) {
    const double r = theta_hat.norm();
    return r <= ball.theta0 ? theta_hat : Vec((ball.theta0 / r) * theta_hat);
  }
  return metric_projection(theta_hat, ball).point;
}

Vec AdaptiveState::pack() const {
  Vec v(xi_c.size() + theta_hat.size());
  v << xi_c, theta_hat;
  return v;
}

AdaptiveState AdaptiveState::unpack(const Vec& packed, int nominal_dim, int param_dim) {
  if (packed.size() != nominal_dim + param_dim)
    throw std::invalid_argument("adaptive state has the wrong dimension");
  return {packed.head(nominal_dim), packed.segment(nominal_dim, param_dim)};
}

Vec BackstepState::pack() const {
  const Vec head = xi_c1.pack();
  Vec v(head.size() + u.size());
  v << head, u;
  return v;
}

BackstepState BackstepState::unpack(const Vec& packed, int nominal_dim, int param_dim, int input_dim) {
  if (packed.size() != nominal_dim + param_dim + input_dim)
    throw std::invalid_argument("backstepping state has the wrong dimension");
  return {AdaptiveState::unpack(packed.head(nominal_dim + param_dim), nominal_dim, param_dim),
          packed.tail(input_dim)};
}

Vec theta_hat_flow(const Vec& x, const Vec& xi_c, const Vec& theta_hat, const AffinePlant& plant,
                   const ParamBall& ball, const StateFn& grad_x_V0) {
  const Vec eta = plant.disturbance_matrix(x, xi_c).transpose() * grad_x_V0(x, xi_c);
  return ball.Gamma1 * proj(eta, theta_hat, ball);
}

ExtendedNonneg robust_gap_min(const AdaptiveDesign& design, const Vec& x, const Vec& xc1) {
  const auto s = AdaptiveState::unpack(xc1, design.nominal_dim(), design.param_dim());
  const ExtendedNonneg nominal_gap = controller_gap(design.nominal, x, s.xi_c);
  if (nominal_gap.is_infinite()) return nominal_gap;
  return nominal_gap + ExtendedNonneg(0.5 * metric_projection(s.theta_hat, design.ball).dist_sq);
}

Vec kappa1(const AdaptiveDesign& design, const Vec& x, const Vec& xc1) {
  const auto s = AdaptiveState::unpack(xc1, design.nominal_dim(), design.param_dim());
  return design.nominal.kappa(x, s.xi_c) - design.plant.matched_uncertainty(x, s.xi_c) * s.theta_hat;
}

RobustController lift_adaptive(const AdaptiveDesign& design) {
  design.ball.validate();
  const int nc = design.nominal_dim();
  const int nt = design.param_dim();
  const Eigen::LDLT<Mat> gamma1(design.ball.Gamma1);

  ControllerData c;
  c.state_dim = nc + nt;
  c.kappa = [design](const Vec& x, const Vec& xc1) { return kappa1(design, x, xc1); };
  c.flow = [design, nc, nt](const Vec& x, const Vec& xc1) {
    const auto s = AdaptiveState::unpack(xc1, nc, nt);
    Vec d(nc + nt);
    d << design.nominal.flow(x, s.xi_c),
        theta_hat_flow(x, s.xi_c, s.theta_hat, design.plant, design.ball, design.grad_x_V0);
    return d;
  };
  c.delta = [design, nc](const Vec& x, const Vec& xc1) { return design.nominal.delta(x, xc1.head(nc)); };
  c.gap_override = [design](const Vec& x, const Vec& xc1) { return robust_gap_min(design, x, xc1); };
  c.jump_override = [design, nc, nt](const Vec& x, const Vec& xc1) {
    const auto s = AdaptiveState::unpack(xc1, nc, nt);
    return AdaptiveState{controller_jump(design.nominal, x, s.xi_c), g_hat(s.theta_hat, design.ball)}.pack();
  };
  c.plant_view = [design, nc](const Vec& xc1) { return design.nominal.nominal_view(xc1.head(nc)); };

  PotentialFamily V1 = [design, nc, nt, gamma1](const Vec& x, const Vec& xc1, const Vec& theta) {
    const auto s = AdaptiveState::unpack(xc1, nc, nt);
    return design.nominal.potential(x, s.xi_c) + ExtendedNonneg(0.5 * inv_quad(gamma1, theta - s.theta_hat));
  };
  return {std::move(c), std::move(V1)};
}

void BackstepGains::validate() const {
  if (!(k_u > 0.0)) throw std::invalid_argument("k_u must be positive");
  require_spd(Gamma2, "Gamma2");
}

Mat jac_kappa1(const StateFn& kappa, const Vec& x, const Vec& xc1) {
  const double h = 1e-6 * std::max(1.0, x.norm());
  Mat J;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x;
    Vec xm = x;
    xp[i] += h;
    xm[i] -= h;
    Vec col;
    try {
      col = (kappa(xp, xc1) - kappa(xm, xc1)) / (2.0 * h);
    } catch (const std::exception& e) {
      throw NonFiniteJacobian(std::string("finite-difference probe failed: ") + e.what());
    }
    if (!col.allFinite()) throw NonFiniteJacobian("finite-difference probe is not finite");
    if (J.size() == 0) J.resize(col.size(), x.size());
    J.col(i) = col;
  }
  return J;
}

namespace {

Mat dx_kappa1(const AdaptiveDesign& design, const KappaJacobian& jac, const Vec& x, const Vec& xc1) {
  if (jac.dx) return jac.dx(x, xc1);
  return jac_kappa1([&design](const Vec& xx, const Vec& cc) { return kappa1(design, xx, cc); }, x, xc1);
}

struct BackstepTerms {
  BackstepState s;
  Vec k1;
  Mat Dk1;
  Vec grad;
  Mat psi_theta;
  Vec ups;
};

BackstepTerms backstep_terms(const AdaptiveDesign& design, const BackstepGains& gains,
                             const KappaJacobian& jac, const Vec& x, const Vec& xc2) {
  BackstepTerms t;
  t.s = BackstepState::unpack(xc2, design.nominal_dim(), design.param_dim(), design.input_dim());
  const Vec xc1 = t.s.xi_c1.pack();
  const Vec& xi_c = t.s.xi_c1.xi_c;
  t.k1 = kappa1(design, x, xc1);
  t.Dk1 = dx_kappa1(design, jac, x, xc1);
  t.grad = design.grad_x_V0(x, xi_c);
  t.psi_theta = design.plant.disturbance_matrix(x, xi_c);
  const Vec w = gains.Gamma2.ldlt().solve(Vec(t.s.u - t.k1));
  t.ups = t.psi_theta.transpose() * t.grad - t.psi_theta.transpose() * t.Dk1.transpose() * w;
  return t;
}

Vec f_u_from(const AdaptiveDesign& design, const BackstepGains& gains, const BackstepTerms& t,
             const Vec& x) {
  const Vec& xi_c = t.s.xi_c1.xi_c;
  const Vec& th = t.s.xi_c1.theta_hat;
  const Vec p = design.ball.Gamma1 * proj(t.ups, th, design.ball);
  return -design.plant.matched_uncertainty(x, xi_c) * p - gains.k_u * (t.s.u - t.k1) -
         gains.Gamma2 * design.plant.input_matrix(x, xi_c).transpose() * t.grad +
         t.Dk1 * design.plant.f(x, xi_c, t.s.u, th);
}

}  // namespace

Vec upsilon(const AdaptiveDesign& design, const BackstepGains& gains, const KappaJacobian& jac,
            const Vec& x, const Vec& xc2) {
  return backstep_terms(design, gains, jac, x, xc2).ups;
}

Vec f_u(const AdaptiveDesign& design, const BackstepGains& gains, const KappaJacobian& jac,
        const Vec& x, const Vec& xc2) {
  return f_u_from(design, gains, backstep_terms(design, gains, jac, x, xc2), x);
}

RobustController lift_backstep(const AdaptiveDesign& design, const BackstepGains& gains,
                               const KappaJacobian& jac) {
  gains.validate();
  RobustController adaptive = lift_adaptive(design);
  const int nc = design.nominal_dim();
  const int nt = design.param_dim();
  const int nu = design.input_dim();
  const Eigen::LDLT<Mat> gamma2(gains.Gamma2);

  ControllerData c;
  c.state_dim = nc + nt + nu;
  c.kappa = [nu](const Vec&, const Vec& xc2) { return Vec(xc2.tail(nu)); };
  c.flow = [design, gains, jac, nc, nt, nu](const Vec& x, const Vec& xc2) {
    const BackstepTerms t = backstep_terms(design, gains, jac, x, xc2);
    const Vec& xi_c = t.s.xi_c1.xi_c;
    const Vec fc = design.nominal.flow(x, xi_c);
    Vec du = f_u_from(design, gains, t, x);
    if (!all_zero(fc)) {
      if (!jac.dxc)
        throw std::logic_error("flowing nominal controller state requires an analytic D_xc kappa1");
      du += jac.dxc(x, t.s.xi_c1.pack()) * fc;
    }
    Vec d(nc + nt + nu);
    d << fc, design.ball.Gamma1 * proj(t.ups, t.s.xi_c1.theta_hat, design.ball), du;
    return d;
  };
  c.delta = [design, nc](const Vec& x, const Vec& xc2) { return design.nominal.delta(x, xc2.head(nc)); };
  c.gap_override = [design, gamma2, nc, nt, nu](const Vec& x, const Vec& xc2) {
    const auto s = BackstepState::unpack(xc2, nc, nt, nu);
    const Vec xc1 = s.xi_c1.pack();
    const ExtendedNonneg base = robust_gap_min(design, x, xc1);
    if (base.is_infinite()) return base;
    return base + ExtendedNonneg(0.5 * inv_quad(gamma2, Vec(s.u - kappa1(design, x, xc1))));
  };
  c.jump_override = [design, adaptive_jump = adaptive.data.jump_override, nc, nt](const Vec& x,
                                                                                 const Vec& xc2) {
    const Vec next = adaptive_jump(x, xc2.head(nc + nt));
    return BackstepState{AdaptiveState::unpack(next, nc, nt), kappa1(design, x, next)}.pack();
  };
  c.plant_view = [design, nc](const Vec& xc2) { return design.nominal.nominal_view(xc2.head(nc)); };

  PotentialFamily V2 = [design, V1 = adaptive.potential_family, gamma2, nc, nt](
                           const Vec& x, const Vec& xc2, const Vec& theta) {
    const Vec xc1 = xc2.head(nc + nt);
    const ExtendedNonneg base = V1(x, xc1, theta);
    if (base.is_infinite()) return base;
    const Vec e = xc2.tail(xc2.size() - nc - nt) - kappa1(design, x, xc1);
    return base + ExtendedNonneg(0.5 * inv_quad(gamma2, e));
  };
  return {std::move(c), std::move(V2)};
}

}  // namespace synergy
