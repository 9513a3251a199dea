#pragma once

// Clinical uses of a fitted chart: age-dependent percentile ranks, the
// signed-rank efficacy test on rank changes, and enrollment screening that
// admits a patient whose traced rank stays out of the zero mass for the trial.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zikq/error.hpp"
#include "zikq/estimator.hpp"
#include "zikq/normal.hpp"
#include "zikq/survival.hpp"

namespace zikq {

enum class RankFlag {
  InBand,
  Absorbed,   // score 0: rank is the upper edge of the zero mass
  AboveBand,  // clamped to the highest charted level
  BelowBand,  // clamped to the lowest charted level
};

inline const char* to_string(RankFlag f) {
  switch (f) {
    case RankFlag::InBand: return "in-band";
    case RankFlag::Absorbed: return "absorbed";
    case RankFlag::AboveBand: return "above-band";
    case RankFlag::BelowBand: return "below-band";
  }
  return "unknown";
}

struct RankResult {
  double rank = 0.0;
  RankFlag flag = RankFlag::InBand;
  std::size_t grid_index = 0;  // chart age used
};

/// Nearest chart age to t (ties to the older age). Ages more than half a
/// grid step outside the chart are out of range.
inline std::size_t nearest_chart_age(const CentileChart& chart, double t) {
  const auto& g = chart.age_grid;
  require(!g.empty(), ErrorKind::InvalidParameter, "chart has no ages");
  return detail::snap_to_grid(g, t, chart.config.grid_step);
}

/// Percentile rank of score y at age t, read off the chart column at the
/// nearest grid age by linear interpolation across levels. Positive scores
/// below the first positive curve interpolate from (1 - S, 0), so any y > 0
/// ranks strictly above the zero mass.
inline RankResult rank_of(const CentileChart& chart, double t, double y) {
  require(std::isfinite(y) && y >= 0.0, ErrorKind::DataError, "score must be nonnegative");
  RankResult out;
  out.grid_index = nearest_chart_age(chart, t);
  const std::size_t k = out.grid_index;
  const double zero_mass = 1.0 - survival_at(chart.survival, chart.age_grid[k]);
  if (y == 0.0) {
    out.rank = zero_mass;
    out.flag = RankFlag::Absorbed;
    return out;
  }

  struct Node {
    double tau;
    double value;
  };
  std::vector<Node> nodes;
  bool absorbed_level = false;
  for (std::size_t l = 0; l < chart.tau_levels.size(); ++l) {
    const auto& v = chart.values[l][k];
    if (!v) continue;
    if (*v == 0.0)
      absorbed_level = true;
    else
      nodes.push_back({chart.tau_levels[l], *v});
  }
  if (nodes.empty()) {
    out.rank = chart.tau_levels.back();
    out.flag = RankFlag::AboveBand;
    return out;
  }
  if (absorbed_level) nodes.insert(nodes.begin(), Node{zero_mass, 0.0});

  if (!absorbed_level && y < nodes.front().value) {
    out.rank = nodes.front().tau;
    out.flag = RankFlag::BelowBand;
    return out;
  }
  double top = 0.0;
  for (const auto& n : nodes) top = std::max(top, n.value);
  if (y > top) {
    out.rank = nodes.back().tau;
    out.flag = RankFlag::AboveBand;
    return out;
  }
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const Node& a = nodes[i];
    const Node& b = nodes[i + 1];
    if (y < std::min(a.value, b.value) || y > std::max(a.value, b.value)) continue;
    if (b.value == a.value) {
      out.rank = b.tau;
    } else {
      out.rank = a.tau + (b.tau - a.tau) * (y - a.value) / (b.value - a.value);
    }
    return out;
  }
  // Only reachable with a single positive node and no anchor.
  out.rank = nodes.front().tau;
  return out;
}

struct EfficacyResult {
  std::size_t n_reduced = 0;  // N_r: nonzero differences
  double W = 0.0;
  double sigma_w = 0.0;
  double z = 0.0;
  double p = 1.0;             // one-sided, H_a: E(D) > 0
  bool small_sample = false;  // N_r <= 20: normal approximation is rough
};

/// Wilcoxon signed-rank test with average ranks for ties and the normal
/// approximation z = W / sqrt(N_r (N_r + 1)(2 N_r + 1) / 6).
inline EfficacyResult wilcoxon_signed_rank(std::span<const double> d, double zero_tol = 1e-12) {
  require(!d.empty(), ErrorKind::InvalidParameter, "no rank changes given");
  std::vector<double> kept;
  for (double v : d) {
    require(std::isfinite(v), ErrorKind::DataError, "rank change must be finite");
    if (std::abs(v) > zero_tol) kept.push_back(v);
  }
  EfficacyResult out;
  out.n_reduced = kept.size();
  out.small_sample = out.n_reduced <= 20;
  if (kept.empty()) return out;

  std::sort(kept.begin(), kept.end(),
            [](double a, double b) { return std::abs(a) < std::abs(b); });
  const std::size_t n = kept.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && std::abs(kept[j]) - std::abs(kept[i]) <= zero_tol) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t m = i; m < j; ++m) out.W += (kept[m] > 0.0 ? 1.0 : -1.0) * avg_rank;
    i = j;
  }
  const double nr = static_cast<double>(n);
  out.sigma_w = std::sqrt(nr * (nr + 1.0) * (2.0 * nr + 1.0) / 6.0);
  out.z = out.W / out.sigma_w;
  out.p = 1.0 - normal::cdf(out.z);
  return out;
}

struct Visit {
  std::string subject_id;
  double age = 0.0;
  double score = 0.0;
};

struct RankChange {
  std::string subject_id;
  double baseline_rank = 0.0;
  double endpoint_rank = 0.0;
  double change = 0.0;
};

struct EfficacyAssessment {
  EfficacyResult test;
  std::vector<RankChange> changes;
};

/// D_i = rank at endpoint minus rank at baseline, tested with the signed-rank statistic.
inline EfficacyAssessment assess_efficacy(const CentileChart& chart, std::span<const Visit> baseline,
                                          std::span<const Visit> endpoint) {
  std::map<std::string, const Visit*> base, end;
  for (const auto& v : baseline) {
    require(base.emplace(v.subject_id, &v).second, ErrorKind::DataError,
            "duplicate baseline visit for subject '" + v.subject_id + "'");
  }
  for (const auto& v : endpoint) {
    require(end.emplace(v.subject_id, &v).second, ErrorKind::DataError,
            "duplicate endpoint visit for subject '" + v.subject_id + "'");
  }
  std::string unmatched;
  for (const auto& [id, v] : base)
    if (!end.count(id)) unmatched += (unmatched.empty() ? "" : ", ") + id;
  for (const auto& [id, v] : end)
    if (!base.count(id)) unmatched += (unmatched.empty() ? "" : ", ") + id;
  require(unmatched.empty(), ErrorKind::DataError, "unmatched subjects: " + unmatched);
  require(!base.empty(), ErrorKind::DataError, "no subjects to assess");

  EfficacyAssessment out;
  std::vector<double> d;
  for (const auto& [id, b] : base) {
    const Visit* e = end.at(id);
    require(e->age > b->age, ErrorKind::DataError,
            "subject '" + id + "': endpoint age must exceed baseline age");
    RankChange rc;
    rc.subject_id = id;
    rc.baseline_rank = rank_of(chart, b->age, b->score).rank;
    rc.endpoint_rank = rank_of(chart, e->age, e->score).rank;
    rc.change = rc.endpoint_rank - rc.baseline_rank;
    d.push_back(rc.change);
    out.changes.push_back(rc);
  }
  out.test = wilcoxon_signed_rank(d);
  return out;
}

struct Eligibility {
  bool eligible = false;
  double rank = 0.0;
  double threshold = 0.0;  // 1 - S(t + delta_t)
  RankFlag flag = RankFlag::InBand;
  bool age_clamped = false;      // baseline age was outside the chart
  bool horizon_clamped = false;  // trial end was beyond the last chart age
};

/// Eligible iff the baseline rank exceeds the zero mass at the end of the
/// trial. S is nonincreasing, so this endpoint check covers the whole trial.
/// The trial end is measured from the chart age the rank was read at.
inline Eligibility screen_eligibility(const CentileChart& chart, double t, double y, double delta_t) {
  require(delta_t >= 0.0 && std::isfinite(delta_t), ErrorKind::InvalidParameter,
          "trial duration must be nonnegative");
  require(std::isfinite(t), ErrorKind::DataError, "age must be finite");
  Eligibility out;
  const double age = std::clamp(t, chart.age_grid.front(), chart.age_grid.back());
  out.age_clamped = age != t;
  const RankResult r = rank_of(chart, age, y);
  out.rank = r.rank;
  out.flag = r.flag;
  double horizon = chart.age_grid[r.grid_index] + delta_t;
  if (horizon > chart.age_grid.back()) {
    horizon = chart.age_grid.back();
    out.horizon_clamped = true;
  }
  out.threshold = 1.0 - survival_at(chart.survival, horizon);
  out.eligible = y > 0.0 && out.rank > out.threshold;
  return out;
}

struct EnrollmentRow {
  double age_lo = 0.0;  // 1-year bin [age_lo, age_lo + 1)
  std::size_t n = 0;
  double rate_proposed = 0.0;
  double rate_fixed = 0.0;
};

struct EnrollmentReport {
  EnrollmentRow overall;
  std::vector<EnrollmentRow> bins;
};

/// Compares the age-dependent rule against a fixed minimum score on each
/// subject's first visit, overall and per 1-year age bin. An absorbed (zero)
/// baseline fails both rules.
inline EnrollmentReport enrollment_report(const LifeCourseDataset& cohort, const CentileChart& chart,
                                          double delta_t, double fixed_threshold) {
  std::map<long, std::array<std::size_t, 3>> tally;  // bin -> n, proposed, fixed
  EnrollmentReport rep;
  std::size_t proposed = 0, fixed = 0;
  for (const auto& s : cohort.subjects) {
    if (s.visits.empty()) continue;
    const Observation& b = s.visits.front();
    const bool p = screen_eligibility(chart, b.age, b.score, delta_t).eligible;
    const bool f = b.score > 0.0 && b.score >= fixed_threshold;
    auto& cell = tally[static_cast<long>(std::floor(b.age))];
    cell[0] += 1;
    cell[1] += p;
    cell[2] += f;
    rep.overall.n += 1;
    proposed += p;
    fixed += f;
  }
  auto rate = [](std::size_t k, std::size_t n) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; };
  rep.overall.age_lo = tally.empty() ? 0.0 : static_cast<double>(tally.begin()->first);
  rep.overall.rate_proposed = rate(proposed, rep.overall.n);
  rep.overall.rate_fixed = rate(fixed, rep.overall.n);
  for (const auto& [bin, c] : tally) {
    rep.bins.push_back({static_cast<double>(bin), c[0], rate(c[1], c[0]), rate(c[2], c[0])});
  }
  return rep;
}

}  // namespace zikq
