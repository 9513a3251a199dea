#pragma once

// Kernel-weighted local linear quantile regression.
//
// The weighted check-loss objective in (a, b) is convex and piecewise linear,
// and some minimizer passes through two data points. The solver walks between
// such two-point lines: holding one interpolated point fixed, the best slope
// through it is a weighted quantile of the pairwise slopes, so each move is an
// exact one-dimensional minimization. A vertex where no rotation about any of
// its interpolated points lowers the objective is a global minimizer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "zikq/error.hpp"
#include "zikq/kernel.hpp"

namespace zikq {

struct AgeScore {
  double age = 0.0;
  double score = 0.0;
};

struct WeightedPoint {
  double x = 0.0;  // centered covariate
  double y = 0.0;
  double w = 0.0;
};

/// Intercept (value at the window center) and slope of a local fit.
struct LocalFit {
  double a = 0.0;
  double b = 0.0;
};

inline double check_loss(double u, double tau) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

inline double check_objective(std::span<const WeightedPoint> pts, double a, double b, double tau) {
  double f = 0.0;
  for (const auto& p : pts) f += p.w * check_loss(p.y - a - b * p.x, tau);
  return f;
}

namespace detail {

struct SlopeEntry {
  double slope;
  double weight;
};

// Smallest value v such that the weight at or below v reaches `target`.
inline double weighted_select(std::vector<SlopeEntry>& entries, double target) {
  std::sort(entries.begin(), entries.end(),
            [](const SlopeEntry& l, const SlopeEntry& r) { return l.slope < r.slope; });
  double cum = 0.0;
  for (const auto& e : entries) {
    cum += e.weight;
    if (cum >= target) return e.slope;
  }
  return entries.back().slope;
}

class CheckLossSolver {
 public:
  CheckLossSolver(std::span<const WeightedPoint> pts, double tau) : pts_(pts), tau_(tau) {
    double xlo = pts_[0].x, xhi = pts_[0].x, ymax = 0.0;
    for (const auto& p : pts_) {
      xlo = std::min(xlo, p.x);
      xhi = std::max(xhi, p.x);
      ymax = std::max(ymax, std::abs(p.y));
    }
    x_eps_ = 1e-12 * std::max(1.0, xhi - xlo);
    r_tol_ = 1e-10 * (1.0 + ymax);
    degenerate_ = (xhi - xlo) <= x_eps_;
  }

  LocalFit solve() {
    // Intercept-only start: the weighted tau-quantile of y.
    std::size_t pivot = intercept_pivot();
    if (degenerate_) return {pts_[pivot].y, 0.0};

    LocalFit fit = best_line_through(pivot);
    double f = check_objective(pts_, fit.a, fit.b, tau_);
    const std::size_t max_moves = 10 * pts_.size() + 100;
    for (std::size_t move = 0; move < max_moves && f > 0.0; ++move) {
      bool improved = false;
      for (std::size_t k = 0; k < pts_.size(); ++k) {
        const auto& p = pts_[k];
        if (std::abs(p.y - fit.a - fit.b * p.x) > r_tol_) continue;
        const LocalFit cand = best_line_through(k);
        const double fc = check_objective(pts_, cand.a, cand.b, tau_);
        if (fc < f - 1e-13 * (1.0 + f)) {
          fit = cand;
          f = fc;
          improved = true;
          break;
        }
      }
      if (!improved) return fit;
    }
    if (f > 0.0) fail(ErrorKind::NumericFailure, "check-loss solver did not converge");
    return fit;
  }

 private:
  std::size_t intercept_pivot() {
    entries_.clear();
    double total = 0.0;
    for (const auto& p : pts_) {
      entries_.push_back({p.y, p.w});
      total += p.w;
    }
    const double q = weighted_select(entries_, tau_ * total);
    std::size_t best = 0;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      if (pts_[i].y == q) {
        best = i;
        break;
      }
    }
    return best;
  }

  // Minimizes over lines through point k: each other point contributes
  // w |dx| rho(slope_i - b) with level tau (dx > 0) or 1 - tau (dx < 0).
  LocalFit best_line_through(std::size_t k) {
    const auto& pk = pts_[k];
    entries_.clear();
    double target = 0.0;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      const double dx = pts_[i].x - pk.x;
      if (std::abs(dx) <= x_eps_) continue;
      const double c = pts_[i].w * std::abs(dx);
      entries_.push_back({(pts_[i].y - pk.y) / dx, c});
      target += c * (dx > 0.0 ? tau_ : 1.0 - tau_);
    }
    if (entries_.empty()) return {pk.y, 0.0};
    const double b = weighted_select(entries_, target);
    return {pk.y - b * pk.x, b};
  }

  std::span<const WeightedPoint> pts_;
  double tau_;
  double x_eps_ = 0.0;
  double r_tol_ = 0.0;
  bool degenerate_ = false;
  std::vector<SlopeEntry> entries_;
};

}  // namespace detail

/// Exact minimizer of sum_i w_i rho_tau(y_i - a - b x_i) over points with w_i > 0.
/// When every covariate value coincides the fit is intercept-only (b = 0).
inline LocalFit solve_check_regression(std::span<const WeightedPoint> points, double tau) {
  require(tau > 0.0 && tau < 1.0, ErrorKind::InvalidParameter, "quantile level must lie in (0,1)");
  std::vector<WeightedPoint> active;
  active.reserve(points.size());
  for (const auto& p : points)
    if (p.w > 0.0) active.push_back(p);
  require(active.size() >= 2, ErrorKind::InsufficientData,
          "local fit needs at least 2 positively weighted points");
  return detail::CheckLossSolver(active, tau).solve();
}

/// Kernel weights K_h(age - t) for the points inside the kernel support.
inline std::vector<WeightedPoint> kernel_window(std::span<const AgeScore> points, double t,
                                                double h, Kernel k) {
  std::vector<WeightedPoint> window;
  for (const auto& p : points) {
    const double x = p.age - t;
    const double w = kernel::weight(k, x, h);
    if (w > 0.0) window.push_back({x, p.score, w});
  }
  return window;
}

/// Local linear tau*-quantile fit centered at age t.
inline LocalFit local_linear_fit(std::span<const AgeScore> points, double t, double tau_star,
                                 double h, Kernel k) {
  require(h > 0.0 && std::isfinite(h), ErrorKind::InvalidParameter, "bandwidth must be positive");
  const auto window = kernel_window(points, t, h, k);
  return solve_check_regression(window, tau_star);
}

}  // namespace zikq
