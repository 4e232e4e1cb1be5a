#pragma once

// Synergistic controller algebra: potentials with values in [0, +inf], the
// minimum/argmin/gap over a finite set of candidate resets, closed-loop
// assembly and post-hoc Lyapunov monitors on hybrid arcs.
//
// Controller states are packed into vectors so that they can be stacked with
// the plant state and handed to the hybrid solver. Discrete logic variables
// occupy one slot each.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "synergy/extended_real.hpp"
#include "synergy/hybrid_core.hpp"

namespace synergy {

inline constexpr double kTieTolerance = 1e-12;
inline constexpr double kIndicatorSentinel = 1e18;

class InfeasibleC1 : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidController : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using StateFn = std::function<Vec(const Vec& x, const Vec& xc)>;
using MatrixFn = std::function<Mat(const Vec& x, const Vec& xc)>;
using ScalarFn = std::function<double(const Vec& x, const Vec& xc)>;
using PotentialFn = std::function<ExtendedNonneg(const Vec& x, const Vec& xc)>;
using CandidatesFn = std::function<std::vector<Vec>(const Vec& x, const Vec& xc)>;
/// V_theta(x, xc): a potential family indexed by the unknown parameter.
using PotentialFamily = std::function<ExtendedNonneg(const Vec& x, const Vec& xc, const Vec& theta)>;

/// x' = f(x, xc, u, theta). `xc` is the nominal controller state.
struct PlantModel {
  int state_dim = 0;
  int input_dim = 0;
  int param_dim = 0;
  std::function<Vec(const Vec& x, const Vec& xc, const Vec& u, const Vec& theta)> f;
  std::function<void(Vec& x)> normalize;  // optional retraction onto the state manifold
};

/// x' = psi_x + psi_u u + psi_theta theta with psi_theta = psi_u psi_th.
struct AffinePlant {
  int state_dim = 0;
  int input_dim = 0;
  int param_dim = 0;
  StateFn drift;                 // psi_x
  MatrixFn input_matrix;         // psi_u
  MatrixFn disturbance_matrix;   // psi_theta
  MatrixFn matched_uncertainty;  // psi_th
  std::function<void(Vec& x)> normalize;

  Vec f(const Vec& x, const Vec& xc, const Vec& u, const Vec& theta) const;
  PlantModel as_plant() const;

  /// Largest |psi_theta - psi_u psi_th| entry over the probes; throws
  /// InvalidController if it exceeds `tol`.
  double check_matched(const std::vector<std::pair<Vec, Vec>>& probes, double tol = 1e-10) const;
};

/// Data of one synergistic controller over a packed controller state.
///
/// Nominal controllers supply `potential` and `candidates`; the gap and the
/// jump map are then derived by enumeration. Robust controllers whose
/// candidate set is not finite supply `gap_override` and `jump_override`
/// instead.
struct ControllerData {
  int state_dim = 0;
  StateFn kappa;
  PotentialFn potential;
  CandidatesFn candidates;
  StateFn flow;
  ScalarFn delta;
  std::function<ExtendedNonneg(const Vec& x, const Vec& xc)> gap_override;
  StateFn jump_override;
  // Maps the packed controller state to the nominal state seen by the plant.
  std::function<Vec(const Vec& xc)> plant_view;

  Vec nominal_view(const Vec& xc) const { return plant_view ? plant_view(xc) : xc; }
};

struct GapReport {
  ExtendedNonneg min_V;
  std::vector<Vec> argmin;
  std::vector<std::size_t> argmin_index;  // positions in the candidate list
  ExtendedNonneg gap;
};

GapReport min_over_candidates(const ControllerData& ctrl, const Vec& x, const Vec& xc);

/// First minimizer in candidate-list order. Throws std::domain_error if the
/// gap is below delta by more than `event_tol`.
Vec select_jump(const ControllerData& ctrl, const Vec& x, const Vec& xc, double event_tol = 1e-10);

/// Gap used by the flow/jump sets (override if present, enumeration otherwise).
ExtendedNonneg controller_gap(const ControllerData& ctrl, const Vec& x, const Vec& xc);
Vec controller_jump(const ControllerData& ctrl, const Vec& x, const Vec& xc);

/// Checks delta > 0 on the probe states; throws InvalidController otherwise.
void validate_delta(const ControllerData& ctrl, const std::vector<std::pair<Vec, Vec>>& probes);

/// Closed loop over the stacked state [x; xc].
HybridSystemDef build_closed_loop(const PlantModel& plant, const Vec& theta_true,
                                  const ControllerData& ctrl);

/// Splits a stacked closed-loop state.
struct StackedState {
  int plant_dim = 0;
  Vec plant(const Vec& s) const { return s.head(plant_dim); }
  Vec controller(const Vec& s) const { return s.tail(s.size() - plant_dim); }
};

struct MonitorViolation {
  std::size_t interval = 0;
  std::size_t index = 0;  // sample index within the interval, or jump index
  double t = 0.0;
  double excess = 0.0;    // amount by which the bound is violated
};

using ArcPotential = std::function<ExtendedNonneg(const Vec& state)>;
using ArcScalar = std::function<double(const Vec& state)>;

/// Consecutive samples of one flow interval where V grows by more than tol.
std::vector<MonitorViolation> monitor_flow_decrease(const HybridArc& arc, const ArcPotential& V,
                                                    double tol);

/// Jumps where V(after) > V(before) - delta(before) + tol.
std::vector<MonitorViolation> monitor_jump_decrease(const HybridArc& arc, const ArcPotential& V,
                                                    const ArcScalar& delta, double tol);

}  // namespace synergy
