#pragma once

// Hybrid time domains, hybrid arcs and an event-located flow/jump solver.
//
// A hybrid system is given by single-valued selections of its data:
//
//   x' = f(x)   while flow_indicator(x) <= 0   (flow set C)
//   x+ = g(x)   when  jump_indicator(x) >= 0   (jump set D)
//
// Flows are integrated with an adaptive Dormand-Prince 5(4) pair. The first
// crossing of the jump indicator is located by bisection on the step size.

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace synergy {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct HybridTime {
  double t = 0.0;
  int j = 0;
};

struct FlowInterval {
  double t_start = 0.0;
  double t_end = 0.0;
  int j = 0;
};

struct HybridTimeDomain {
  std::vector<FlowInterval> intervals;

  bool contains(HybridTime ht) const;
};

struct Sample {
  double t = 0.0;
  Vec x;
};

struct JumpRecord {
  double t = 0.0;
  int j = 0;  // jump counter before the jump
  Vec before;
  Vec after;
};

/// A solution parametrized by hybrid time. `samples[k]` holds the samples of
/// `domain.intervals[k]`; `jumps[k]` connects interval k to interval k+1.
struct HybridArc {
  HybridTimeDomain domain;
  std::vector<std::vector<Sample>> samples;
  std::vector<JumpRecord> jumps;

  const Sample& front() const { return samples.front().front(); }
  const Sample& back() const { return samples.back().back(); }
  HybridTime end_time() const;
  std::size_t sample_count() const;
};

struct HybridSystemDef {
  std::function<Vec(const Vec&)> flow_map;
  std::function<double(const Vec&)> flow_indicator;  // <= 0 inside C
  std::function<double(const Vec&)> jump_indicator;  // >= 0 inside D
  std::function<Vec(const Vec&)> jump_map;
  // Optional retraction applied to every accepted flow state (e.g. keeping a
  // component on the unit circle).
  std::function<void(Vec&)> normalize;
};

enum class Priority { jump_first, flow_first };

struct StopBall {
  std::function<double(const Vec&)> distance;
  double radius = 0.0;
};

struct SolverConfig {
  double t_max = 10.0;
  int j_max = 1000;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  double event_tol = 1e-10;
  double max_step = 0.01;
  Priority priority = Priority::jump_first;
  std::optional<StopBall> stop_ball;

  void validate() const;
};

enum class ExitReason { time, converged, jump_boundary };

struct FlowSegment {
  std::vector<Sample> samples;  // first sample is the initial state
  ExitReason exit_reason = ExitReason::time;
};

class HybridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationStalled : public HybridError {
 public:
  using HybridError::HybridError;
};

class DomainEscape : public HybridError {
 public:
  using HybridError::HybridError;
};

class JumpOutsideD : public HybridError {
 public:
  using HybridError::HybridError;
};

class ZenoSuspected : public HybridError {
 public:
  using HybridError::HybridError;
};

class InvalidInitialState : public HybridError {
 public:
  using HybridError::HybridError;
};

/// Integrates from (t0, state) until t_max, the stop ball, or the first
/// crossing of the jump indicator from below.
FlowSegment advance_flow(const Vec& state, double t0, const HybridSystemDef& sys,
                         const SolverConfig& cfg);

/// Applies the jump map; throws JumpOutsideD when the state is not in D.
Vec apply_jump(const Vec& state, const HybridSystemDef& sys, double event_tol = 1e-10);

HybridArc solve(const HybridSystemDef& sys, const Vec& x0, const SolverConfig& cfg);

struct DomainViolation {
  enum class Kind {
    empty_arc,
    interval_order,
    contiguity,
    j_increment,
    sample_outside_interval,
    sample_order,
    jump_count,
    jump_time,
    jump_state
  };
  Kind kind;
  std::size_t index;  // interval or jump index
  std::string message;
};

std::vector<DomainViolation> validate_domain(const HybridArc& arc);

std::string to_string(ExitReason r);
std::string to_string(Priority p);
Priority parse_priority(const std::string& s);

}  // namespace synergy
