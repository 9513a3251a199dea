#pragma once

// Synthetic deteriorating-disease cohorts with a known centile structure, and
// the RMSE benchmark of the calibrated estimator against a naive kernel
// quantile fit that ignores the zero mass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zikq/error.hpp"
#include "zikq/estimator.hpp"
#include "zikq/parallel.hpp"
#include "zikq/survival.hpp"

namespace zikq {

/// Linear interpolation through (x, y) breakpoints, constant beyond the ends.
struct PiecewiseLinear {
  std::vector<std::pair<double, double>> points;

  double operator()(double t) const {
    if (t <= points.front().first) return points.front().second;
    if (t >= points.back().first) return points.back().second;
    const auto it = std::upper_bound(points.begin(), points.end(), t,
                                     [](double v, const auto& p) { return v < p.first; });
    const auto& [x1, y1] = *it;
    const auto& [x0, y0] = *(it - 1);
    return y0 + (y1 - y0) * (t - x0) / (x1 - x0);
  }

  void validate(const char* name) const {
    require(!points.empty(), ErrorKind::InvalidParameter, std::string(name) + ": empty table");
    for (std::size_t i = 1; i < points.size(); ++i)
      require(points[i].first > points[i - 1].first, ErrorKind::InvalidParameter,
              std::string(name) + ": breakpoints must be strictly increasing");
  }
};

/// Ground truth: survival S(t), plus Q_min(t) = Q(1 - S(t) | t) and Q_max(t) = Q(1 | t).
/// Between them the quantile is linear in tau, which is the generating model
/// Y = [Q_min (1 - tau) + Q_max (tau - (1 - S))] / S.
struct TruthModel {
  PiecewiseLinear survival;
  PiecewiseLinear q_min;
  PiecewiseLinear q_max;

  /// Synthetic analog of a deteriorating ambulatory score: no losses before
  /// age 7, then survival falling linearly to 0.1 at 16; the top of the
  /// distribution rises 20 -> 34 over ages 4-7 and then falls to 8 at 16.
  static TruthModel default_model() {
    TruthModel m;
    m.survival.points = {{7.0, 1.0}, {16.0, 0.1}};
    m.q_max.points = {{4.0, 20.0}, {7.0, 34.0}, {16.0, 8.0}};
    m.q_min.points = {{4.0, 6.0}, {7.0, 10.2}, {16.0, 2.4}};
    return m;
  }

  double s(double t) const { return survival(t); }

  double quantile(double tau, double t) const {
    const double st = s(t);
    if (tau <= 1.0 - st) return 0.0;
    return (q_min(t) * (1.0 - tau) + q_max(t) * (tau - (1.0 - st))) / st;
  }

  void validate() const {
    survival.validate("survival");
    q_min.validate("q_min");
    q_max.validate("q_max");
    for (std::size_t i = 0; i < survival.points.size(); ++i) {
      const double v = survival.points[i].second;
      require(v >= 0.0 && v <= 1.0, ErrorKind::InvalidParameter, "survival must lie in [0,1]");
      if (i > 0)
        require(v <= survival.points[i - 1].second, ErrorKind::InvalidParameter,
                "survival must be nonincreasing");
    }
    // Q_min <= Q_max at every breakpoint of either table keeps Q monotone in tau.
    std::vector<double> ages;
    for (const auto& p : q_min.points) ages.push_back(p.first);
    for (const auto& p : q_max.points) ages.push_back(p.first);
    for (double a : ages) {
      require(q_min(a) >= 0.0, ErrorKind::InvalidParameter, "Q_min must be nonnegative");
      require(q_max(a) >= q_min(a), ErrorKind::InvalidParameter, "Q_max must be at least Q_min");
    }
  }
};

struct CohortConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  double age_start_lo = 4.0;
  double age_start_hi = 13.0;
  int max_visits = 6;
  double visit_gap = 0.5;
  double tau_jitter = 0.05;

  void validate() const {
    require(n > 0, ErrorKind::InvalidParameter, "cohort size must be positive");
    require(age_start_lo >= 0.0 && age_start_hi > age_start_lo, ErrorKind::InvalidParameter,
            "entry age range must be nondegenerate");
    require(max_visits >= 1, ErrorKind::InvalidParameter, "max_visits must be positive");
    require(visit_gap > 0.0, ErrorKind::InvalidParameter, "visit_gap must be positive");
    require(tau_jitter >= 0.0 && tau_jitter < 1.0, ErrorKind::InvalidParameter,
            "tau_jitter must lie in [0,1)");
  }
};

/// Portable random stream: splitmix64-seeded xoshiro256**, 53-bit uniforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    for (auto& s : state_) s = splitmix(seed);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(next() % span);
  }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Independent child stream for replicate `index`.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return splitmix(s);
  }

 private:
  static std::uint64_t splitmix(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

inline std::string subject_label(std::size_t index, std::size_t n) {
  const int width = static_cast<int>(std::to_string(n).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%0*zu", width, index + 1);
  return buf;
}

/// Simulates n subjects: J ~ U{1..max_visits}, entry age ~ U(lo, hi), a
/// latent level tau_1 ~ U(0,1) jittered per visit. A visit whose level falls
/// in the zero mass records 0 and ends the subject's follow-up.
inline LifeCourseDataset generate_cohort(const TruthModel& truth, const CohortConfig& config) {
  truth.validate();
  config.validate();
  Rng rng(config.seed);
  LifeCourseDataset data;
  data.visit_gap = config.visit_gap;
  data.subjects.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    SubjectRecord subject;
    subject.id = subject_label(i, config.n);
    const int visits = rng.uniform_int(1, config.max_visits);
    const double entry = rng.uniform(config.age_start_lo, config.age_start_hi);
    const double tau1 = rng.uniform();
    const double lo = std::max(tau1 - config.tau_jitter, 0.0);
    const double hi = std::min(tau1 + config.tau_jitter, 1.0);
    for (int j = 0; j < visits; ++j) {
      const double t = entry + config.visit_gap * j;
      const double tau = rng.uniform(lo, hi);
      const double y = truth.quantile(tau, t);
      subject.visits.push_back({t, y});
      if (y == 0.0) break;
    }
    data.subjects.push_back(std::move(subject));
  }
  return data;
}

/// Perturbs every visit age by N(0, jitter_sd^2) noise truncated to less than
/// half the distance to each neighbouring visit, so ages stay strictly increasing.
inline LifeCourseDataset irregular_grid_variant(const LifeCourseDataset& cohort, double jitter_sd,
                                                std::uint64_t seed) {
  require(jitter_sd >= 0.0 && std::isfinite(jitter_sd), ErrorKind::InvalidParameter,
          "jitter_sd must be nonnegative");
  if (jitter_sd == 0.0) return cohort;
  Rng rng(seed);
  LifeCourseDataset out = cohort;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& src = cohort.subjects[i].visits;
    auto& dst = out.subjects[i].visits;
    for (std::size_t j = 0; j < src.size(); ++j) {
      double room = 0.5 * cohort.visit_gap;
      if (j > 0) room = std::min(room, 0.5 * (src[j].age - src[j - 1].age));
      if (j + 1 < src.size()) room = std::min(room, 0.5 * (src[j + 1].age - src[j].age));
      room = std::min(0.99 * room, src[j].age);
      double e;
      do {
        e = jitter_sd * rng.normal();
      } while (std::abs(e) >= room && room > 0.0);
      dst[j].age = src[j].age + (room > 0.0 ? e : 0.0);
    }
  }
  return out;
}

/// Kernel quantile chart at the nominal levels over every observed record
/// (zeros included), with no imputation and no survival calibration.
inline CentileChart fit_naive_baseline(const LifeCourseDataset& data, std::span<const double> tau_levels,
                                       std::span<const double> age_grid, const EstimatorConfig& config) {
  config.validate();
  detail::check_levels(tau_levels);
  detail::check_ages(age_grid);
  require(data.observation_count() > 0, ErrorKind::InsufficientData, "empty dataset");
  validate(data);

  CentileChart chart;
  chart.tau_levels.assign(tau_levels.begin(), tau_levels.end());
  chart.age_grid.assign(age_grid.begin(), age_grid.end());
  chart.config = config;
  chart.survival = SurvivalCurve::constant_one();
  const SmoothingData points = make_smoothing_data(all_points(data), config);
  chart.h_mean = points.h_mean;

  const std::size_t L = tau_levels.size(), A = age_grid.size();
  chart.values.assign(L, std::vector<std::optional<double>>(A));
  parallel_for(L * A, config.threads, [&](std::size_t cell) {
    const std::size_t l = cell / A, a = cell % A;
    const double level = std::clamp(tau_levels[l], config.tau_clamp_eps, 1.0 - config.tau_clamp_eps);
    chart.values[l][a] = detail::fit_cell(points, age_grid[a], level, config);
  });
  if (config.rearrange) detail::rearrange_columns(chart);
  return chart;
}

struct BenchmarkRow {
  double tau = 0.0;
  double rmse_zikq = 0.0;
  double rmse_naive = 0.0;
  std::size_t missing_zikq = 0;  // cells skipped over all replicates
  std::size_t missing_naive = 0;
};

struct BenchmarkOptions {
  std::vector<double> age_grid;  // empty: default_benchmark_grid
  EstimatorConfig estimator;
  unsigned threads = 1;  // replicate-level parallelism
};

/// Ages from one visit after the earliest entry to one visit before the latest
/// possible visit, in steps of the visit gap.
inline std::vector<double> default_benchmark_grid(const CohortConfig& c) {
  const double first = c.age_start_lo + c.visit_gap;
  const double last = c.age_start_hi + c.visit_gap * (c.max_visits - 2);
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double a = first + c.visit_gap * k;
    if (a > last + 1e-9) break;
    grid.push_back(a);
  }
  return grid;
}

/// Root-mean-square error of each chart row against the truth over the age
/// grid. Missing cells are skipped and counted.
inline std::vector<std::pair<double, std::size_t>> chart_rmse(const CentileChart& chart,
                                                              const TruthModel& truth) {
  std::vector<std::pair<double, std::size_t>> out;
  for (std::size_t l = 0; l < chart.tau_levels.size(); ++l) {
    double sse = 0.0;
    std::size_t used = 0, missing = 0;
    for (std::size_t a = 0; a < chart.age_grid.size(); ++a) {
      const auto& v = chart.values[l][a];
      if (!v) {
        ++missing;
        continue;
      }
      const double err = *v - truth.quantile(chart.tau_levels[l], chart.age_grid[a]);
      sse += err * err;
      ++used;
    }
    out.emplace_back(used ? std::sqrt(sse / static_cast<double>(used)) : 0.0, missing);
  }
  return out;
}

/// Average per-level RMSE over replicates; replicate r uses seed Rng::derive(config.seed, r).
inline std::vector<BenchmarkRow> rmse_benchmark(const TruthModel& truth, const CohortConfig& config,
                                                std::span<const double> tau_levels,
                                                std::size_t replicates,
                                                const BenchmarkOptions& options = {}) {
  require(replicates >= 1, ErrorKind::InvalidParameter, "replicates must be at least 1");
  truth.validate();
  config.validate();
  detail::check_levels(tau_levels);
  const std::vector<double> grid =
      options.age_grid.empty() ? default_benchmark_grid(config) : options.age_grid;
  EstimatorConfig est = options.estimator;
  est.threads = 1;

  using PerLevel = std::vector<std::pair<double, std::size_t>>;
  std::vector<PerLevel> zikq(replicates), naive(replicates);
  parallel_for(replicates, options.threads, [&](std::size_t r) {
    CohortConfig cc = config;
    cc.seed = Rng::derive(config.seed, r);
    const LifeCourseDataset cohort = generate_cohort(truth, cc);
    zikq[r] = chart_rmse(build_chart(cohort, tau_levels, grid, est), truth);
    naive[r] = chart_rmse(fit_naive_baseline(cohort, tau_levels, grid, est), truth);
  });

  std::vector<BenchmarkRow> rows(tau_levels.size());
  for (std::size_t l = 0; l < rows.size(); ++l) {
    rows[l].tau = tau_levels[l];
    for (std::size_t r = 0; r < replicates; ++r) {
      rows[l].rmse_zikq += zikq[r][l].first;
      rows[l].rmse_naive += naive[r][l].first;
      rows[l].missing_zikq += zikq[r][l].second;
      rows[l].missing_naive += naive[r][l].second;
    }
    rows[l].rmse_zikq /= static_cast<double>(replicates);
    rows[l].rmse_naive /= static_cast<double>(replicates);
  }
  return rows;
}

}  // namespace zikq
