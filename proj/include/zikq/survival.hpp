#pragma once

// Life-course records and the absorbing-state survival estimate.
//
// Natural-history data differ from classical time-to-event data: subjects
// enter at different ages and are only seen while they are still under
// observation, so the risk set at a grid age is rebuilt from what is seen
// there (events d, dropouts c, active positives s) instead of being carried
// forward from a common baseline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "zikq/error.hpp"

namespace zikq {

struct Observation {
  double age = 0.0;
  double score = 0.0;
};

struct SubjectRecord {
  std::string id;
  std::vector<Observation> visits;  // strictly increasing ages
};

struct LifeCourseDataset {
  std::vector<SubjectRecord> subjects;
  double visit_gap = 0.5;

  std::size_t observation_count() const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += s.visits.size();
    return n;
  }
};

/// Throws DataError describing the first violated dataset invariant.
inline void validate(const LifeCourseDataset& data) {
  require(data.visit_gap > 0.0 && std::isfinite(data.visit_gap), ErrorKind::InvalidParameter,
          "visit_gap must be positive");
  std::set<std::string> ids;
  for (const auto& subject : data.subjects) {
    require(ids.insert(subject.id).second, ErrorKind::DataError,
            "duplicate subject_id '" + subject.id + "'");
    for (std::size_t j = 0; j < subject.visits.size(); ++j) {
      const auto& v = subject.visits[j];
      require(std::isfinite(v.age) && v.age >= 0.0, ErrorKind::DataError,
              "subject '" + subject.id + "': age must be finite and nonnegative");
      require(std::isfinite(v.score) && v.score >= 0.0, ErrorKind::DataError,
              "subject '" + subject.id + "': score must be finite and nonnegative");
      if (j > 0) {
        require(v.age > subject.visits[j - 1].age, ErrorKind::DataError,
                "subject '" + subject.id + "': ages must strictly increase");
        require(subject.visits[j - 1].score > 0.0, ErrorKind::DataError,
                "subject '" + subject.id + "': observation after absorbing zero");
      }
    }
  }
}

/// Appends a zero one visit gap after any subject whose last score lies in (0, c0).
inline LifeCourseDataset impute_absorbing(const LifeCourseDataset& data, double c0) {
  require(c0 > 0.0 && std::isfinite(c0), ErrorKind::InvalidParameter, "C0 must be positive");
  LifeCourseDataset out = data;
  for (auto& subject : out.subjects) {
    if (subject.visits.empty()) continue;
    const Observation last = subject.visits.back();
    if (last.score > 0.0 && last.score < c0) {
      subject.visits.push_back({last.age + data.visit_gap, 0.0});
    }
  }
  return out;
}

struct RiskTable {
  std::vector<double> grid;
  std::vector<long> d;  // events
  std::vector<long> c;  // dropouts after the previous grid age
  std::vector<long> s;  // active positives

  std::size_t size() const { return grid.size(); }
  long at_risk(std::size_t r) const { return d[r] + c[r] + s[r]; }
};

/// Multiples of step covering every observed age to within half a step.
inline std::vector<double> default_grid(const LifeCourseDataset& data, double step) {
  require(step > 0.0 && std::isfinite(step), ErrorKind::InvalidParameter,
          "grid step must be positive");
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& subject : data.subjects) {
    for (const auto& v : subject.visits) {
      lo = any ? std::min(lo, v.age) : v.age;
      hi = any ? std::max(hi, v.age) : v.age;
      any = true;
    }
  }
  require(any, ErrorKind::InsufficientData, "dataset has no observations");
  const double first = std::round(lo / step);
  const auto last = static_cast<std::size_t>(std::round(hi / step) - first);
  std::vector<double> grid(last + 1);
  for (std::size_t r = 0; r <= last; ++r) grid[r] = (first + static_cast<double>(r)) * step;
  return grid;
}

namespace detail {

inline void check_grid(const std::vector<double>& grid) {
  require(!grid.empty(), ErrorKind::InvalidParameter, "empty grid");
  for (std::size_t r = 0; r < grid.size(); ++r) {
    require(std::isfinite(grid[r]), ErrorKind::InvalidParameter, "grid must be finite");
    if (r > 0)
      require(grid[r] > grid[r - 1], ErrorKind::InvalidParameter,
              "grid must be strictly increasing");
  }
}

// Nearest grid index; ties go to the larger age. Ages further than half a
// step outside either end of the grid are rejected.
inline std::size_t snap_to_grid(const std::vector<double>& grid, double age, double lone_step) {
  const std::size_t n = grid.size();
  const double first_half = 0.5 * (n > 1 ? grid[1] - grid[0] : lone_step);
  const double last_half = 0.5 * (n > 1 ? grid[n - 1] - grid[n - 2] : lone_step);
  if (age < grid.front() - first_half || age > grid.back() + last_half) {
    fail(ErrorKind::OutOfRange, "age " + std::to_string(age) + " lies outside the grid range");
  }
  const auto it = std::lower_bound(grid.begin(), grid.end(), age);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return n - 1;
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  const double up = grid[hi] - age;
  const double down = age - grid[hi - 1];
  return up <= down ? hi : hi - 1;
}

}  // namespace detail

/// How visits enter the risk set.
///
/// Observed: every visit counts where it is seen (events d, active positives
/// s) and a subject whose final visit is positive is a dropout c at the next
/// grid age, so n_r = d_r + c_r + s_r.
///
/// DelayedEntry: a subject is at risk at a grid age only when the visit there
/// follows a positive visit; entry visits carry no hazard information (an
/// entry zero is an event of unknown age) and dropouts leave by not being
/// seen, so c is zero. This is the product-limit estimator under left
/// truncation and stays consistent when entry ages are staggered.
enum class RiskSetRule { Observed, DelayedEntry };

/// Tabulates d, c and s per grid age. A subject contributes at most once per
/// grid age; an event wins over a positive visit in the same bin.
inline RiskTable build_risk_table(const LifeCourseDataset& data, const std::vector<double>& grid,
                                  RiskSetRule rule = RiskSetRule::Observed) {
  detail::check_grid(grid);
  RiskTable table;
  table.grid = grid;
  const std::size_t R = grid.size();
  table.d.assign(R, 0);
  table.c.assign(R, 0);
  table.s.assign(R, 0);

  std::vector<int> state(R, 0);  // 0 unseen, 1 positive, 2 event
  std::vector<std::size_t> touched;
  for (const auto& subject : data.subjects) {
    if (subject.visits.empty()) continue;
    touched.clear();
    const std::size_t skip = rule == RiskSetRule::DelayedEntry ? 1 : 0;
    for (std::size_t j = skip; j < subject.visits.size(); ++j) {
      const Observation& v = subject.visits[j];
      const std::size_t r = detail::snap_to_grid(grid, v.age, data.visit_gap);
      if (state[r] == 0) touched.push_back(r);
      state[r] = std::max(state[r], v.score == 0.0 ? 2 : 1);
    }
    for (std::size_t r : touched) {
      (state[r] == 2 ? table.d[r] : table.s[r]) += 1;
      state[r] = 0;
    }
    const Observation& last = subject.visits.back();
    if (rule == RiskSetRule::Observed && last.score > 0.0) {
      const std::size_t r = detail::snap_to_grid(grid, last.age, data.visit_gap);
      if (r + 1 < R) table.c[r + 1] += 1;
    }
  }
  return table;
}

/// Right-continuous nonincreasing step function; equals 1 before the first knot.
struct SurvivalCurve {
  std::vector<double> knots;
  std::vector<double> values;

  static SurvivalCurve constant_one() { return {{0.0}, {1.0}}; }
};

inline double survival_at(const SurvivalCurve& curve, double t) {
  const auto it = std::upper_bound(curve.knots.begin(), curve.knots.end(), t);
  if (it == curve.knots.begin()) return 1.0;
  return curve.values[static_cast<std::size_t>(it - curve.knots.begin()) - 1];
}

/// Product-limit estimate over the risk table: S(t_k) = prod_{r<=k} (1 - d_r / n_r)
/// with n_r = d_r + c_r + s_r. Empty grid ages contribute a factor of one.
inline SurvivalCurve km_estimate(const RiskTable& table) {
  detail::check_grid(table.grid);
  const std::size_t R = table.size();
  require(table.d.size() == R && table.c.size() == R && table.s.size() == R,
          ErrorKind::InvalidParameter, "risk table columns differ in length");
  SurvivalCurve curve;
  curve.knots = table.grid;
  curve.values.resize(R);
  double surv = 1.0;
  for (std::size_t r = 0; r < R; ++r) {
    require(table.d[r] >= 0 && table.c[r] >= 0 && table.s[r] >= 0, ErrorKind::InvalidParameter,
            "risk table counts must be nonnegative");
    const long n = table.at_risk(r);
    if (n > 0) surv *= 1.0 - static_cast<double>(table.d[r]) / static_cast<double>(n);
    curve.values[r] = surv;
  }
  return curve;
}

}  // namespace zikq
