#pragma once

// Zero-inflated kernel quantile estimation of reference centile charts.
//
// Q(tau | t) is 0 when tau <= 1 - S(t) and otherwise the tau*-quantile of the
// positive scores near t, with tau* = (tau - (1 - S(t))) / S(t).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zikq/bandwidth.hpp"
#include "zikq/error.hpp"
#include "zikq/kernel.hpp"
#include "zikq/local_linear.hpp"
#include "zikq/parallel.hpp"
#include "zikq/survival.hpp"

namespace zikq {

enum class CalibrationKind { Absorbed, Positive };

struct CalibrationResult {
  CalibrationKind kind = CalibrationKind::Absorbed;
  double tau_star = 0.0;      // clamped level used for fitting
  double tau_star_raw = 0.0;  // before clamping

  bool absorbed() const { return kind == CalibrationKind::Absorbed; }
};

inline CalibrationResult calibrate_tau(double tau, double s_t, double clamp_eps = 0.01) {
  require(tau > 0.0 && tau < 1.0, ErrorKind::InvalidParameter, "tau must lie in (0,1)");
  require(s_t >= 0.0 && s_t <= 1.0, ErrorKind::InvalidParameter, "survival must lie in [0,1]");
  require(clamp_eps > 0.0 && clamp_eps < 0.5, ErrorKind::InvalidParameter,
          "tau clamp must lie in (0,0.5)");
  CalibrationResult out;
  const double zero_mass = 1.0 - s_t;
  if (tau <= zero_mass) return out;
  out.kind = CalibrationKind::Positive;
  out.tau_star_raw = (tau - zero_mass) / s_t;
  out.tau_star = std::clamp(out.tau_star_raw, clamp_eps, 1.0 - clamp_eps);
  return out;
}

struct EstimatorConfig {
  double c0 = 1.0;
  Kernel kernel = Kernel::Epanechnikov;
  double tau_clamp_eps = 0.01;
  std::optional<double> bandwidth_override;  // pins h_mean
  double grid_step = 0.5;
  RiskSetRule risk_set = RiskSetRule::DelayedEntry;
  std::size_t min_window_points = 10;
  double widen_factor = 1.5;
  int max_widenings = 2;
  bool rearrange = false;  // sort each age column across levels
  unsigned threads = 1;

  void validate() const {
    require(c0 > 0.0 && std::isfinite(c0), ErrorKind::InvalidParameter, "C0 must be positive");
    require(tau_clamp_eps > 0.0 && tau_clamp_eps < 0.5, ErrorKind::InvalidParameter,
            "tau_clamp_eps must lie in (0,0.5)");
    require(grid_step > 0.0 && std::isfinite(grid_step), ErrorKind::InvalidParameter,
            "grid_step must be positive");
    require(!bandwidth_override || (*bandwidth_override > 0.0 && std::isfinite(*bandwidth_override)),
            ErrorKind::InvalidParameter, "bandwidth override must be positive");
    require(min_window_points >= 2, ErrorKind::InvalidParameter,
            "min_window_points must be at least 2");
    require(widen_factor > 1.0 && max_widenings >= 0, ErrorKind::InvalidParameter,
            "invalid window widening policy");
  }
};

/// values[level][age]; std::nullopt marks a cell without enough data.
struct CentileChart {
  std::vector<double> tau_levels;
  std::vector<double> age_grid;
  std::vector<std::vector<std::optional<double>>> values;
  SurvivalCurve survival;
  double h_mean = 0.0;
  EstimatorConfig config;

  const std::optional<double>& at(std::size_t level, std::size_t age) const {
    return values[level][age];
  }
};

/// Ages (sorted) and scores feeding a local fit, with the h_mean derived from them.
struct SmoothingData {
  std::vector<AgeScore> points;
  double h_mean = 0.0;
  double age_range = 0.0;
};

namespace detail {

inline void check_levels(std::span<const double> levels) {
  require(!levels.empty(), ErrorKind::InvalidParameter, "no quantile levels given");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    require(levels[i] > 0.0 && levels[i] < 1.0, ErrorKind::InvalidParameter,
            "quantile levels must lie in (0,1)");
    if (i > 0)
      require(levels[i] > levels[i - 1], ErrorKind::InvalidParameter,
              "quantile levels must be ordered and distinct");
  }
}

inline void check_ages(std::span<const double> ages) {
  require(!ages.empty(), ErrorKind::InvalidParameter, "empty age grid");
  for (std::size_t i = 0; i < ages.size(); ++i) {
    require(std::isfinite(ages[i]) && ages[i] >= 0.0, ErrorKind::InvalidParameter,
            "age grid values must be finite and nonnegative");
    if (i > 0)
      require(ages[i] > ages[i - 1], ErrorKind::InvalidParameter,
              "age grid must be strictly increasing");
  }
}

// Fits the local tau-quantile at t, widening the window when it holds fewer
// than min_window_points points. Returns nullopt when every attempt is short.
// The fit is floored at the smallest score in the window, so positive-part
// fits stay positive and fits over data containing zeros stay nonnegative.
inline std::optional<double> fit_cell(const SmoothingData& data, double t, double level,
                                      const EstimatorConfig& config) {
  const double lo = std::min(config.grid_step, data.age_range);
  double h = std::clamp(h_tau(data.h_mean, level), lo, data.age_range);
  const double reach = kernel::support(config.kernel);
  const auto by_age = [](const AgeScore& p, double a) { return p.age < a; };
  for (int attempt = 0; attempt <= config.max_widenings; ++attempt) {
    const auto first = std::lower_bound(data.points.begin(), data.points.end(), t - reach * h, by_age);
    const auto last = std::lower_bound(first, data.points.end(), t + reach * h, by_age);
    std::vector<WeightedPoint> window;
    double window_min = 0.0;
    for (auto it = first; it != last; ++it) {
      const double x = it->age - t;
      const double w = kernel::weight(config.kernel, x, h);
      if (w <= 0.0) continue;
      window_min = window.empty() ? it->score : std::min(window_min, it->score);
      window.push_back({x, it->score, w});
    }
    if (window.size() >= config.min_window_points) {
      const LocalFit fit = solve_check_regression(window, level);
      return std::max(fit.a, window_min);
    }
    if (h >= data.age_range) break;
    h = std::min(h * config.widen_factor, data.age_range);
  }
  return std::nullopt;
}

inline void rearrange_columns(CentileChart& chart) {
  for (std::size_t a = 0; a < chart.age_grid.size(); ++a) {
    std::vector<std::size_t> slots;
    std::vector<double> vals;
    for (std::size_t l = 0; l < chart.tau_levels.size(); ++l) {
      if (chart.values[l][a]) {
        slots.push_back(l);
        vals.push_back(*chart.values[l][a]);
      }
    }
    std::sort(vals.begin(), vals.end());
    for (std::size_t i = 0; i < slots.size(); ++i) chart.values[slots[i]][a] = vals[i];
  }
}

}  // namespace detail

/// Points sorted by age with the plug-in (or pinned) h_mean.
inline SmoothingData make_smoothing_data(std::vector<AgeScore> points, const EstimatorConfig& config) {
  std::sort(points.begin(), points.end(), [](const AgeScore& l, const AgeScore& r) {
    return l.age < r.age || (l.age == r.age && l.score < r.score);
  });
  SmoothingData data;
  require(points.size() >= 2, ErrorKind::InsufficientData, "too few observations to smooth");
  data.age_range = points.back().age - points.front().age;
  require(data.age_range > 0.0, ErrorKind::InsufficientData, "observations span a single age");
  data.h_mean = config.bandwidth_override
                    ? *config.bandwidth_override
                    : h_mean_rot(points, config.kernel, config.grid_step);
  data.points = std::move(points);
  return data;
}

inline std::vector<AgeScore> positive_points(const LifeCourseDataset& data) {
  std::vector<AgeScore> pts;
  for (const auto& s : data.subjects)
    for (const auto& v : s.visits)
      if (v.score > 0.0) pts.push_back({v.age, v.score});
  return pts;
}

inline std::vector<AgeScore> all_points(const LifeCourseDataset& data) {
  std::vector<AgeScore> pts;
  for (const auto& s : data.subjects)
    for (const auto& v : s.visits) pts.push_back({v.age, v.score});
  return pts;
}

/// Chart cell from prepared positive-part data; nullopt if the window stays too sparse.
inline std::optional<double> estimate_cell(const SmoothingData& positives, double s_t, double tau,
                                           double t, const EstimatorConfig& config) {
  const CalibrationResult cal = calibrate_tau(tau, s_t, config.tau_clamp_eps);
  if (cal.absorbed()) return 0.0;
  return detail::fit_cell(positives, t, cal.tau_star, config);
}

inline double estimate_quantile(const LifeCourseDataset& data, const SurvivalCurve& survival,
                                double tau, double t, const EstimatorConfig& config) {
  config.validate();
  const CalibrationResult cal = calibrate_tau(tau, survival_at(survival, t), config.tau_clamp_eps);
  if (cal.absorbed()) return 0.0;
  const SmoothingData positives = make_smoothing_data(positive_points(data), config);
  const auto v = detail::fit_cell(positives, t, cal.tau_star, config);
  if (!v) fail(ErrorKind::InsufficientData, "no usable kernel window at age " + std::to_string(t));
  return *v;
}

/// Chart ages: multiples of step within half a step of every observation,
/// so any observed visit can be ranked on the chart.
inline std::vector<double> chart_grid(const LifeCourseDataset& data, double step) {
  return default_grid(data, step);
}

/// Product-limit survival curve of already-imputed records on the default grid.
inline SurvivalCurve estimate_survival(const LifeCourseDataset& imputed, double grid_step,
                                       RiskSetRule rule) {
  return km_estimate(build_risk_table(imputed, default_grid(imputed, grid_step), rule));
}

/// Full pipeline: impute_absorbing -> build_risk_table -> km_estimate -> per-cell fits.
inline CentileChart build_chart(const LifeCourseDataset& data, std::span<const double> tau_levels,
                                std::span<const double> age_grid, const EstimatorConfig& config) {
  config.validate();
  detail::check_levels(tau_levels);
  detail::check_ages(age_grid);
  require(data.observation_count() > 0, ErrorKind::InsufficientData, "empty dataset");
  validate(data);

  const LifeCourseDataset imputed = impute_absorbing(data, config.c0);
  CentileChart chart;
  chart.tau_levels.assign(tau_levels.begin(), tau_levels.end());
  chart.age_grid.assign(age_grid.begin(), age_grid.end());
  chart.config = config;
  chart.survival = estimate_survival(imputed, config.grid_step, config.risk_set);

  const SmoothingData positives = make_smoothing_data(positive_points(imputed), config);
  chart.h_mean = positives.h_mean;

  const std::size_t L = tau_levels.size(), A = age_grid.size();
  chart.values.assign(L, std::vector<std::optional<double>>(A));
  parallel_for(L * A, config.threads, [&](std::size_t cell) {
    const std::size_t l = cell / A, a = cell % A;
    const double t = age_grid[a];
    chart.values[l][a] = estimate_cell(positives, survival_at(chart.survival, t), tau_levels[l], t, config);
  });
  if (config.rearrange) detail::rearrange_columns(chart);
  return chart;
}

}  // namespace zikq
