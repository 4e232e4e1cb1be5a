#pragma once

// Parameter projection, the adaptive lift of a nominally synergistic
// controller, the min-over-parameter-ball gap and reset, and the
// backstepping lift that turns the input into a controller state.
//
// The unknown parameter lives in the ball
//   Omega = { theta : |theta| <= theta0 }
// and the estimate is confined to Omega + eps B by the projection operator.

#include <stdexcept>

#include "synergy/synergistic_core.hpp"

namespace synergy {

class NonFiniteJacobian : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamBall {
  double theta0 = 1.0;
  double eps = 1.0;
  Mat Gamma1 = Mat::Identity(2, 2);

  void validate() const;
  /// True when Gamma1 = gamma * I, which admits closed-form projections.
  bool scalar_gain() const;
};

/// Smooth indicator of Omega + eps B: <= 0 on Omega, 1 on its outer boundary.
double p_indicator(const Vec& theta_hat, const ParamBall& ball);
Vec p_gradient(const Vec& theta_hat, const ParamBall& ball);

/// Lipschitz projection of the update direction `eta`.
Vec proj(const Vec& eta, const Vec& theta_hat, const ParamBall& ball);

struct MetricProjection {
  Vec point;       // argmin over Omega of (theta - theta_hat)' Gamma1^-1 (theta - theta_hat)
  double dist_sq;  // the minimum value
};

/// Projection of theta_hat onto Omega in the Gamma1^-1 metric. Closed form for
/// scalar gains; Lagrange-multiplier bisection otherwise.
MetricProjection metric_projection(const Vec& theta_hat, const ParamBall& ball);

/// Reset of the estimate at jumps (maximizer of the worst-case decrease).
Vec g_hat(const Vec& theta_hat, const ParamBall& ball);

/// Layout of the packed adaptive state [xi_c; theta_hat].
struct AdaptiveState {
  Vec xi_c;
  Vec theta_hat;

  Vec pack() const;
  static AdaptiveState unpack(const Vec& packed, int nominal_dim, int param_dim);
};

/// Layout of the packed backstepping state [xi_c; theta_hat; u].
struct BackstepState {
  AdaptiveState xi_c1;
  Vec u;

  Vec pack() const;
  static BackstepState unpack(const Vec& packed, int nominal_dim, int param_dim, int input_dim);
};

/// Everything the lifts need from the nominal design.
struct AdaptiveDesign {
  ControllerData nominal;
  AffinePlant plant;
  ParamBall ball;
  StateFn grad_x_V0;  // gradient of the nominal potential in ambient plant coordinates

  int nominal_dim() const { return nominal.state_dim; }
  int param_dim() const { return plant.param_dim; }
  int input_dim() const { return plant.input_dim; }
};

/// A controller whose flow/jump logic is independent of the true parameter,
/// together with the parameter-indexed potential used only for monitoring.
struct RobustController {
  ControllerData data;
  PotentialFamily potential_family;
};

Vec theta_hat_flow(const Vec& x, const Vec& xi_c, const Vec& theta_hat, const AffinePlant& plant,
                   const ParamBall& ball, const StateFn& grad_x_V0);

/// gap_V0(x, xi_c) + 1/2 min over Omega of |theta - theta_hat|^2 in the Gamma1^-1 metric.
ExtendedNonneg robust_gap_min(const AdaptiveDesign& design, const Vec& x, const Vec& xc1);

/// kappa1 = kappa0 - psi_th theta_hat over the packed adaptive state.
Vec kappa1(const AdaptiveDesign& design, const Vec& x, const Vec& xc1);

RobustController lift_adaptive(const AdaptiveDesign& design);

struct BackstepGains {
  Mat Gamma2 = Mat::Identity(2, 2);
  double k_u = 1.0;

  void validate() const;
};

/// Jacobians of kappa1 with respect to the plant state and (optionally) the
/// nominal controller state. Empty `dx` selects central finite differences.
struct KappaJacobian {
  MatrixFn dx;
  MatrixFn dxc;
};

/// Central-difference Jacobian of `kappa` in x with step 1e-6 max(1, |x|).
Mat jac_kappa1(const StateFn& kappa, const Vec& x, const Vec& xc1);

Vec upsilon(const AdaptiveDesign& design, const BackstepGains& gains, const KappaJacobian& jac,
            const Vec& x, const Vec& xc2);

/// Input dynamics without the D_xc kappa1 F_c term.
Vec f_u(const AdaptiveDesign& design, const BackstepGains& gains, const KappaJacobian& jac,
        const Vec& x, const Vec& xc2);

RobustController lift_backstep(const AdaptiveDesign& design, const BackstepGains& gains,
                               const KappaJacobian& jac);

}  // namespace synergy
