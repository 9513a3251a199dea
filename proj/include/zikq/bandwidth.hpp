#pragma once

// Bandwidths for local-linear quantile smoothing: a rule-of-thumb plug-in for
// the mean-regression bandwidth, rescaled for each quantile level by
// h_tau = h_mean * [tau (1 - tau) / phi(Phi^{-1}(tau))^2]^{1/5}.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "zikq/error.hpp"
#include "zikq/kernel.hpp"
#include "zikq/local_linear.hpp"
#include "zikq/normal.hpp"

namespace zikq {

struct PluginEstimate {
  double sigma2 = 0.0;    // residual variance of the quartic pilot
  double theta22 = 0.0;   // mean squared second derivative of the pilot
  double age_range = 0.0;
  std::size_t m = 0;
  double h = 0.0;         // unclamped bandwidth
  bool fallback = false;  // theta22 vanished; h = range / 4
};

namespace detail {

// Least-squares coefficients of a degree-4 polynomial in u via Householder QR.
inline std::array<double, 5> quartic_least_squares(std::span<const double> u,
                                                   std::span<const double> y) {
  constexpr std::size_t p = 5;
  const std::size_t m = u.size();
  std::vector<double> A(m * p);  // column-major
  std::vector<double> rhs(y.begin(), y.end());
  for (std::size_t i = 0; i < m; ++i) {
    double v = 1.0;
    for (std::size_t j = 0; j < p; ++j) {
      A[j * m + i] = v;
      v *= u[i];
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    double* col = &A[j * m];
    double norm = 0.0;
    for (std::size_t i = j; i < m; ++i) norm += col[i] * col[i];
    norm = std::sqrt(norm);
    require(norm > 0.0, ErrorKind::InsufficientData, "quartic pilot design is rank deficient");
    const double alpha = col[j] > 0.0 ? -norm : norm;
    std::vector<double> v(col + j, col + m);
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (double e : v) vnorm2 += e * e;
    if (vnorm2 == 0.0) continue;
    auto reflect = [&](double* target) {
      double dot = 0.0;
      for (std::size_t i = j; i < m; ++i) dot += v[i - j] * target[i];
      const double scale = 2.0 * dot / vnorm2;
      for (std::size_t i = j; i < m; ++i) target[i] -= scale * v[i - j];
    };
    for (std::size_t k = j; k < p; ++k) reflect(&A[k * m]);
    reflect(rhs.data());
  }
  std::array<double, p> beta{};
  for (std::size_t jj = p; jj-- > 0;) {
    double acc = rhs[jj];
    for (std::size_t k = jj + 1; k < p; ++k) acc -= A[k * m + jj] * beta[k];
    const double diag = A[jj * m + jj];
    require(std::abs(diag) > 1e-300, ErrorKind::InsufficientData,
            "quartic pilot design is rank deficient");
    beta[jj] = acc / diag;
  }
  return beta;
}

}  // namespace detail

/// Rule-of-thumb plug-in for the local-linear mean-regression bandwidth,
/// using a global quartic least-squares pilot. No clamping is applied.
inline PluginEstimate h_mean_plugin(std::span<const AgeScore> points, Kernel kernel) {
  const std::size_t m = points.size();
  require(m >= 10, ErrorKind::InsufficientData, "bandwidth plug-in needs at least 10 points");
  double lo = points[0].age, hi = points[0].age;
  for (const auto& p : points) {
    lo = std::min(lo, p.age);
    hi = std::max(hi, p.age);
  }
  const double range = hi - lo;
  require(range > 0.0, ErrorKind::InsufficientData, "bandwidth plug-in needs distinct ages");

  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * range;
  std::vector<double> u(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    u[i] = (points[i].age - center) / half;
    y[i] = points[i].score;
  }
  const auto beta = detail::quartic_least_squares(u, y);

  double rss = 0.0, curv = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double ui = u[i];
    const double fit = beta[0] + ui * (beta[1] + ui * (beta[2] + ui * (beta[3] + ui * beta[4])));
    rss += (y[i] - fit) * (y[i] - fit);
    const double second = (2.0 * beta[2] + ui * (6.0 * beta[3] + ui * 12.0 * beta[4])) / (half * half);
    curv += second * second;
  }

  PluginEstimate est;
  est.m = m;
  est.age_range = range;
  est.sigma2 = rss / static_cast<double>(m - 5);
  est.theta22 = curv / static_cast<double>(m);
  if (est.theta22 < 1e-12) {
    est.fallback = true;
    est.h = range / 4.0;
  } else {
    est.h = std::pow(kernel::amise_constant(kernel) * est.sigma2 * range /
                         (static_cast<double>(m) * est.theta22),
                     0.2);
  }
  return est;
}

/// Plug-in h_mean clamped to [min_bandwidth, age range].
inline double h_mean_rot(std::span<const AgeScore> points, Kernel kernel, double min_bandwidth) {
  const PluginEstimate est = h_mean_plugin(points, kernel);
  return std::clamp(est.h, std::min(min_bandwidth, est.age_range), est.age_range);
}

/// [tau (1 - tau) / phi(Phi^{-1}(tau))^2]^{1/5}; symmetric about 0.5 where it is (pi/2)^{1/5}.
inline double h_tau_factor(double tau_star) {
  require(tau_star > 0.0 && tau_star < 1.0, ErrorKind::InvalidParameter,
          "calibrated level must lie in (0,1)");
  const double dens = normal::pdf(normal::quantile(tau_star));
  return std::pow(tau_star * (1.0 - tau_star) / (dens * dens), 0.2);
}

inline double h_tau(double h_mean, double tau_star) {
  require(h_mean > 0.0 && std::isfinite(h_mean), ErrorKind::InvalidParameter,
          "h_mean must be positive");
  return h_mean * h_tau_factor(tau_star);
}

struct BandwidthSelection {
  double h_mean = 0.0;
  std::map<double, double> per_level;  // calibrated level -> bandwidth
};

inline BandwidthSelection select_bandwidths(double h_mean, std::span<const double> tau_stars,
                                            double min_bandwidth, double max_bandwidth) {
  BandwidthSelection sel;
  sel.h_mean = h_mean;
  for (double ts : tau_stars)
    sel.per_level[ts] = std::clamp(h_tau(h_mean, ts), min_bandwidth, max_bandwidth);
  return sel;
}

}  // namespace zikq
