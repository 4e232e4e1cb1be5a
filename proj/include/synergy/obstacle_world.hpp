#pragma once

// Planar vehicle z' = u + theta avoiding a disk obstacle. The punctured plane
// is mapped onto the cylinder R x S^1 by
//
//   psi(z) = ( log(|z - z0| - r), (z - z0) / |z - z0| )
//
// and the circle factor is covered by two stereographic charts indexed by
// q in {-1, +1}. The chart potentials and their gradient feedback form a
// nominally synergistic controller; the adaptive and backstepping lifts are
// assembled into ready-to-run scenarios here.

#include <cmath>
#include <stdexcept>
#include <string>

#include "synergy/adaptive.hpp"

namespace synergy::obstacle {

using Vec2 = Eigen::Vector2d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat23 = Eigen::Matrix<double, 2, 3>;

inline constexpr double kGuardBand = 1e-12;

class InsideObstacle : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ChartSingular : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ObstacleDisk {
  Vec2 center{1.0, 0.0};
  double radius = 0.5;

  void validate() const;
};

struct CylinderPoint {
  double x1 = 0.0;
  Vec2 s{1.0, 0.0};

  Vec to_vec() const;
  static CylinderPoint from_vec(const Vec& x);
};

/// Chart index; stored in packed controller states as +-1.0.
enum class ChartIndex : int { minus = -1, plus = 1 };

int chart_sign(ChartIndex q);
ChartIndex chart_from_value(double v);

CylinderPoint psi(const Vec2& z, const ObstacleDisk& obs);
Vec2 psi_inv(const CylinderPoint& x, const ObstacleDisk& obs);
Vec2 psi_inv(const Vec& x, const ObstacleDisk& obs);

/// Jacobian of psi at a planar point.
Mat32 d_psi(const Vec2& z, const ObstacleDisk& obs);

/// D psi(psi^-1(x)) in closed form on ambient coordinates of R^3. Agrees with
/// d_psi(psi_inv(x)) on the cylinder.
Mat32 d_psi_at(const Vec& x, const ObstacleDisk& obs);

Vec2 phi_q(const Vec& x, int q);
Mat23 d_phi_q(const Vec& x, int q);

/// Chart coordinates of the target psi(0).
Vec2 target_chart(const ObstacleDisk& obs, int q);

ExtendedNonneg V0(const Vec& x, int q, const ObstacleDisk& obs);
/// Ambient gradient D phi_q' (phi_q(x) - phi_q(psi(0))).
Vec grad_V0(const Vec& x, int q, const ObstacleDisk& obs);

Vec2 kappa0(const Vec& x, int q, const ObstacleDisk& obs);
/// Analytic 2x3 Jacobian of kappa0 in ambient coordinates.
Mat23 dx_kappa0(const Vec& x, int q, const ObstacleDisk& obs);

/// Rescales the circle component of an ambient cylinder vector to unit norm.
void normalize_cylinder(Vec& x);

/// x' = D psi(psi^-1(x)) (u + theta); the uncertainty is matched with psi_th = I.
AffinePlant obstacle_plant(const ObstacleDisk& obs);

/// Nominal synergistic controller over xc = [q]. Candidates are listed as (-1, +1).
/// Throws InvalidController if delta is not positive on a probe grid.
ControllerData build_nominal_controller(const ObstacleDisk& obs, ScalarFn delta);

ScalarFn constant_delta(double value);

enum class ControllerKind { nominal, adaptive, backstep };
enum class InitialInput { kappa1, zero };

std::string to_string(ControllerKind k);
ControllerKind parse_controller_kind(const std::string& s);
std::string to_string(InitialInput p);
InitialInput parse_initial_input(const std::string& s);

struct ScenarioParams {
  Vec2 z_init{2.0, 0.0};
  Vec theta = Vec2(std::sqrt(2.0) / 2.0, std::sqrt(2.0) / 2.0);
  Vec theta_hat0 = Vec2::Zero();
  double k_u = 1.0;
  Mat Gamma1 = Mat::Identity(2, 2);
  Mat Gamma2 = Mat::Identity(2, 2);
  double eps = 1.0;
  double theta0 = 1.0;
  double delta = 1.0;
  InitialInput u0 = InitialInput::kappa1;
  SolverConfig solver = default_solver();

  static SolverConfig default_solver();
};

/// Fully assembled closed loop plus evaluators over its stacked state
/// [x1 x2 x3 | q | theta_hat | u].
struct Scenario {
  ControllerKind kind = ControllerKind::nominal;
  int q0 = 1;
  ObstacleDisk obstacle;
  ScenarioParams params;

  AdaptiveDesign design;
  BackstepGains gains;
  ControllerData controller;
  PotentialFamily potential_family;
  HybridSystemDef system;
  Vec initial_state;

  static constexpr int plant_dim = 3;

  Vec plant_state(const Vec& s) const { return s.head(plant_dim); }
  Vec controller_state(const Vec& s) const { return s.tail(s.size() - plant_dim); }
  int chart(const Vec& s) const;
  Vec2 position(const Vec& s) const;
  Vec2 theta_hat(const Vec& s) const;
  Vec2 input(const Vec& s) const;
  ExtendedNonneg true_potential(const Vec& s) const;
  ExtendedNonneg robust_gap(const Vec& s) const;
  double delta(const Vec& s) const;
};

Scenario make_scenario(ControllerKind kind, int q0, const ObstacleDisk& obs = {},
                       const ScenarioParams& params = {});

}  // namespace synergy::obstacle
