#pragma once

// Brute-force reference computations used by the property suites. They are
// deliberately independent of the closed forms and bisection solvers they
// check: plain grids, exhaustive enumeration and central differences.

#include <functional>
#include <vector>

#include "synergy/adaptive.hpp"

namespace synergy::oracle {

/// Central-difference Jacobian with a fixed step.
Mat central_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h);

/// ||A - B|| / max(||B||, 1) in the Frobenius norm.
double relative_error(const Mat& A, const Mat& B);

/// Minimum of (theta - theta_hat)' Gamma1^-1 (theta - theta_hat) over the
/// planar ball |theta| <= theta0 by a polar grid. A coarse pass at 10x the
/// target spacing is refined in a window around its best point; the objective
/// is convex, so the window always contains the minimizer.
double grid_dist_sq(const Vec& theta_hat, const ParamBall& ball, double spacing = 1e-3);

/// Nominal gap by enumeration plus half of grid_dist_sq.
ExtendedNonneg grid_robust_gap(const AdaptiveDesign& design, const Vec& x, const Vec& xc1,
                               double spacing = 1e-3);

/// Worst-case jump decrease of the parameter part when the estimate is reset
/// to g, i.e. the minimum over |theta| <= theta0 of
///   (theta - theta_hat)' G (theta - theta_hat) - (theta - g)' G (theta - g),  G = Gamma1^-1.
double reset_objective(const Vec& g, const Vec& theta_hat, const ParamBall& ball);

struct GridMax {
  Vec argmax;
  double value;
};

/// Maximum of reset_objective over a Cartesian grid covering |g| <= theta0 + eps,
/// followed by two 10x finer passes around the best grid point.
GridMax grid_reset_max(const Vec& theta_hat, const ParamBall& ball, double spacing = 1e-2);

/// Exhaustive min / argmin / gap over an explicit list of potential values.
struct EnumeratedGap {
  ExtendedNonneg min_V;
  std::vector<std::size_t> argmin;
  ExtendedNonneg gap;
};
EnumeratedGap enumerate_gap(const std::vector<ExtendedNonneg>& candidate_values, const ExtendedNonneg& current,
                            double tie_tol);

}  // namespace synergy::oracle
