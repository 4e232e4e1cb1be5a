#include "synergy/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace synergy::oracle {

namespace {

using V2 = Eigen::Vector2d;
using M2 = Eigen::Matrix2d;

const double kTwoPi = 2.0 * std::acos(-1.0);

void require_planar(const Vec& v, const ParamBall& ball) {
  if (v.size() != 2 || ball.Gamma1.rows() != 2) throw std::invalid_argument("grid oracles are planar only");
}

}  // namespace

Mat central_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  Mat J;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x;
    Vec xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Vec col = (f(xp) - f(xm)) / (2.0 * h);
    if (J.size() == 0) J.resize(col.size(), x.size());
    J.col(i) = col;
  }
  return J;
}

double relative_error(const Mat& A, const Mat& B) { return (A - B).norm() / std::max(B.norm(), 1.0); }

double grid_dist_sq(const Vec& theta_hat, const ParamBall& ball, double spacing) {
  require_planar(theta_hat, ball);
  const M2 G = M2(ball.Gamma1).inverse();
  const V2 th = theta_hat;
  const double R = ball.theta0;
  auto f = [&](const V2& p) { return (p - th).dot(G * (p - th)); };

  double best = std::numeric_limits<double>::infinity();
  V2 best_p = V2::Zero();
  auto visit = [&](const V2& p) {
    const double v = f(p);
    if (v < best) {
      best = v;
      best_p = p;
    }
  };

  const double coarse = 10.0 * spacing;
  const int rings = static_cast<int>(std::ceil(R / coarse));
  for (int i = 0; i <= rings; ++i) {
    const double r = R * i / rings;
    const int m = std::max(1, static_cast<int>(std::ceil(kTwoPi * r / coarse)));
    for (int k = 0; k < m; ++k) {
      const double a = kTwoPi * k / m;
      visit(V2(r * std::cos(a), r * std::sin(a)));
    }
  }

  const int rim = static_cast<int>(std::ceil(kTwoPi * R / spacing));
  for (int k = 0; k < rim; ++k) {
    const double a = kTwoPi * k / rim;
    visit(V2(R * std::cos(a), R * std::sin(a)));
  }

  const V2 centre = best_p;
  const int w = 20;
  for (int a = -w; a <= w; ++a) {
    for (int b = -w; b <= w; ++b) {
      const V2 p = centre + spacing * V2(a, b);
      if (p.norm() <= R) visit(p);
    }
  }
  return best;
}

ExtendedNonneg grid_robust_gap(const AdaptiveDesign& design, const Vec& x, const Vec& xc1, double spacing) {
  const auto s = AdaptiveState::unpack(xc1, design.nominal_dim(), design.param_dim());
  const std::vector<Vec> cands = design.nominal.candidates(x, s.xi_c);
  std::vector<ExtendedNonneg> values;
  for (const Vec& g : cands) values.push_back(design.nominal.potential(x, g));
  const EnumeratedGap e = enumerate_gap(values, design.nominal.potential(x, s.xi_c), kTieTolerance);
  if (e.gap.is_infinite()) return e.gap;
  return e.gap + ExtendedNonneg(0.5 * grid_dist_sq(s.theta_hat, design.ball, spacing));
}

namespace {

double reset_objective_2d(const V2& g, const V2& th, const M2& G, double theta0) {
  // Linear in theta, so the minimum over the ball sits at -theta0 w / |w|.
  const V2 w = G * (g - th);
  return -2.0 * theta0 * w.norm() + th.dot(G * th) - g.dot(G * g);
}

}  // namespace

double reset_objective(const Vec& g, const Vec& theta_hat, const ParamBall& ball) {
  require_planar(theta_hat, ball);
  return reset_objective_2d(g, theta_hat, M2(ball.Gamma1).inverse(), ball.theta0);
}

GridMax grid_reset_max(const Vec& theta_hat, const ParamBall& ball, double spacing) {
  require_planar(theta_hat, ball);
  const M2 G = M2(ball.Gamma1).inverse();
  const V2 th = theta_hat;
  const double R = ball.theta0 + ball.eps;
  V2 best_g = V2::Zero();
  double best = -std::numeric_limits<double>::infinity();
  auto sweep = [&](const V2& centre, double h, int n) {
    const V2 c = centre;
    for (int a = -n; a <= n; ++a) {
      for (int b = -n; b <= n; ++b) {
        const V2 g = c + h * V2(a, b);
        if (g.norm() > R) continue;
        const double v = reset_objective_2d(g, th, G, ball.theta0);
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
    }
  };
  sweep(V2::Zero(), spacing, static_cast<int>(std::ceil(R / spacing)));
  // The objective is concave, so zooming in around the incumbent is safe.
  for (double h = spacing / 10.0; h >= spacing / 100.0; h /= 10.0) sweep(best_g, h, 20);
  return {Vec(best_g), best};
}

EnumeratedGap enumerate_gap(const std::vector<ExtendedNonneg>& candidate_values, const ExtendedNonneg& current,
                            double tie_tol) {
  EnumeratedGap e{ExtendedNonneg::infinity(), {}, ExtendedNonneg::infinity()};
  for (const auto& v : candidate_values)
    if (v < e.min_V) e.min_V = v;
  if (e.min_V.is_infinite()) throw InfeasibleC1("no finite candidate");
  for (std::size_t k = 0; k < candidate_values.size(); ++k) {
    const auto& v = candidate_values[k];
    if (v.is_finite() && v.value() - e.min_V.value() <= tie_tol) e.argmin.push_back(k);
  }
  if (current.is_infinite()) return e;
  e.gap = ExtendedNonneg(std::max(0.0, current.value() - e.min_V.value()));
  return e;
}

}  // namespace synergy::oracle
