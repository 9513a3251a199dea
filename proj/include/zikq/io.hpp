#pragma once

// CSV and JSON formats for cohorts, charts, survival curves, truth models and
// reports. Numbers are written in shortest round-trip form so that reading a
// file back reproduces the in-memory values exactly.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "zikq/clinical.hpp"
#include "zikq/error.hpp"
#include "zikq/estimator.hpp"
#include "zikq/simulate.hpp"
#include "zikq/survival.hpp"

namespace zikq::io {

using json = nlohmann::json;

inline constexpr int chart_format_version = 1;

inline std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& text, std::size_t line, const char* what) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    fail(ErrorKind::DataError,
         "line " + std::to_string(line) + ": " + what + " '" + text + "' is not a number");
  }
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::DataError, "cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::DataError, "cannot write '" + path + "'");
  return out;
}

namespace detail {

// Reads a header plus rows with the expected column count; calls row(fields, line).
template <class RowFn>
void read_table(std::istream& in, const std::vector<std::string>& header, RowFn&& row) {
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (!seen_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        fail(ErrorKind::DataError, "line " + std::to_string(lineno) + ": expected header '" + want + "'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      fail(ErrorKind::DataError, "line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(header.size()) + " fields, found " +
                                     std::to_string(fields.size()));
    }
    row(fields, lineno);
  }
  require(seen_header, ErrorKind::DataError, "missing CSV header");
}

}  // namespace detail

/// Cohort CSV with header subject_id,age,score. Rows may come in any order;
/// subjects keep their first-appearance order and visits are sorted by age.
inline LifeCourseDataset parse_cohort_csv(std::istream& in, double visit_gap = 0.5) {
  struct Row {
    double age;
    double score;
    std::size_t line;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  detail::read_table(in, {"subject_id", "age", "score"}, [&](const auto& f, std::size_t line) {
    require(!f[0].empty(), ErrorKind::DataError, "line " + std::to_string(line) + ": empty subject_id");
    const double age = parse_number(f[1], line, "age");
    const double score = parse_number(f[2], line, "score");
    require(age >= 0.0, ErrorKind::DataError, "line " + std::to_string(line) + ": negative age");
    require(score >= 0.0, ErrorKind::DataError, "line " + std::to_string(line) + ": negative score");
    auto [it, fresh] = rows.try_emplace(f[0]);
    if (fresh) order.push_back(f[0]);
    it->second.push_back({age, score, line});
  });

  LifeCourseDataset data;
  data.visit_gap = visit_gap;
  for (const auto& id : order) {
    auto& list = rows[id];
    std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.age < b.age; });
    SubjectRecord subject;
    subject.id = id;
    for (std::size_t j = 0; j < list.size(); ++j) {
      if (j > 0 && list[j].age == list[j - 1].age) {
        fail(ErrorKind::DataError, "lines " + std::to_string(list[j - 1].line) + " and " +
                                       std::to_string(list[j].line) + ": duplicate age for subject '" +
                                       id + "'");
      }
      if (j > 0 && list[j - 1].score == 0.0) {
        fail(ErrorKind::DataError, "line " + std::to_string(list[j].line) + ": subject '" + id +
                                       "' has data after the absorbing zero on line " +
                                       std::to_string(list[j - 1].line));
      }
      subject.visits.push_back({list[j].age, list[j].score});
    }
    data.subjects.push_back(std::move(subject));
  }
  return data;
}

inline LifeCourseDataset read_cohort_csv(const std::string& path, double visit_gap = 0.5) {
  auto in = open_input(path);
  return parse_cohort_csv(in, visit_gap);
}

inline void write_cohort_csv(const LifeCourseDataset& data, std::ostream& out) {
  out << "subject_id,age,score\n";
  for (const auto& s : data.subjects)
    for (const auto& v : s.visits) out << s.id << ',' << fmt(v.age) << ',' << fmt(v.score) << '\n';
}

/// Visits CSV with header subject_id,age,score (one row per visit, no grouping).
inline std::vector<Visit> parse_visits_csv(std::istream& in) {
  std::vector<Visit> visits;
  detail::read_table(in, {"subject_id", "age", "score"}, [&](const auto& f, std::size_t line) {
    const double age = parse_number(f[1], line, "age");
    const double score = parse_number(f[2], line, "score");
    require(score >= 0.0, ErrorKind::DataError, "line " + std::to_string(line) + ": negative score");
    visits.push_back({f[0], age, score});
  });
  return visits;
}

struct PairedVisits {
  std::vector<Visit> baseline;
  std::vector<Visit> endpoint;
};

/// Efficacy CSV with header subject_id,phase,age,score and phase in {baseline, endpoint}.
inline PairedVisits parse_efficacy_csv(std::istream& in) {
  PairedVisits out;
  detail::read_table(in, {"subject_id", "phase", "age", "score"}, [&](const auto& f, std::size_t line) {
    const Visit v{f[0], parse_number(f[2], line, "age"), parse_number(f[3], line, "score")};
    require(v.score >= 0.0, ErrorKind::DataError, "line " + std::to_string(line) + ": negative score");
    if (f[1] == "baseline")
      out.baseline.push_back(v);
    else if (f[1] == "endpoint")
      out.endpoint.push_back(v);
    else
      fail(ErrorKind::DataError, "line " + std::to_string(line) + ": unknown phase '" + f[1] + "'");
  });
  return out;
}

// --- charts ---------------------------------------------------------------

/// Rows are ages, columns are levels; missing cells are left empty.
inline void write_chart_csv(const CentileChart& chart, std::ostream& out) {
  out << "age";
  for (double tau : chart.tau_levels) out << ',' << fmt(tau);
  out << '\n';
  for (std::size_t a = 0; a < chart.age_grid.size(); ++a) {
    out << fmt(chart.age_grid[a]);
    for (std::size_t l = 0; l < chart.tau_levels.size(); ++l) {
      out << ',';
      if (const auto& v = chart.values[l][a]) out << fmt(*v);
    }
    out << '\n';
  }
}

inline void write_survival_csv(const SurvivalCurve& curve, std::ostream& out) {
  out << "knot,value\n";
  for (std::size_t i = 0; i < curve.knots.size(); ++i)
    out << fmt(curve.knots[i]) << ',' << fmt(curve.values[i]) << '\n';
}

inline std::string_view to_string(RiskSetRule r) {
  return r == RiskSetRule::Observed ? "observed" : "delayed-entry";
}

inline RiskSetRule parse_risk_set(std::string_view name) {
  if (name == "observed") return RiskSetRule::Observed;
  if (name == "delayed-entry") return RiskSetRule::DelayedEntry;
  fail(ErrorKind::InvalidParameter, "unknown risk set rule '" + std::string(name) + "'");
}

inline json config_to_json(const EstimatorConfig& c) {
  json j;
  j["c0"] = c.c0;
  j["kernel"] = std::string(zikq::to_string(c.kernel));
  j["tau_clamp_eps"] = c.tau_clamp_eps;
  j["bandwidth_override"] = c.bandwidth_override ? json(*c.bandwidth_override) : json(nullptr);
  j["grid_step"] = c.grid_step;
  j["risk_set"] = std::string(to_string(c.risk_set));
  j["min_window_points"] = c.min_window_points;
  j["widen_factor"] = c.widen_factor;
  j["max_widenings"] = c.max_widenings;
  j["rearrange"] = c.rearrange;
  return j;
}

inline EstimatorConfig config_from_json(const json& j, EstimatorConfig c = {}) {
  if (j.contains("c0")) c.c0 = j.at("c0").get<double>();
  if (j.contains("kernel")) c.kernel = parse_kernel(j.at("kernel").get<std::string>());
  if (j.contains("tau_clamp_eps")) c.tau_clamp_eps = j.at("tau_clamp_eps").get<double>();
  if (j.contains("bandwidth_override") && !j.at("bandwidth_override").is_null())
    c.bandwidth_override = j.at("bandwidth_override").get<double>();
  if (j.contains("grid_step")) c.grid_step = j.at("grid_step").get<double>();
  if (j.contains("risk_set")) c.risk_set = parse_risk_set(j.at("risk_set").get<std::string>());
  if (j.contains("min_window_points")) c.min_window_points = j.at("min_window_points").get<std::size_t>();
  if (j.contains("widen_factor")) c.widen_factor = j.at("widen_factor").get<double>();
  if (j.contains("max_widenings")) c.max_widenings = j.at("max_widenings").get<int>();
  if (j.contains("rearrange")) c.rearrange = j.at("rearrange").get<bool>();
  return c;
}

inline json chart_to_json(const CentileChart& chart) {
  json j;
  j["format"] = "zikq-chart";
  j["version"] = chart_format_version;
  j["tau_levels"] = chart.tau_levels;
  j["age_grid"] = chart.age_grid;
  json rows = json::array();
  for (const auto& level : chart.values) {
    json row = json::array();
    for (const auto& v : level) row.push_back(v ? json(*v) : json(nullptr));
    rows.push_back(std::move(row));
  }
  j["values"] = std::move(rows);
  j["survival"] = {{"knots", chart.survival.knots}, {"values", chart.survival.values}};
  j["h_mean"] = chart.h_mean;
  j["config"] = config_to_json(chart.config);
  return j;
}

inline CentileChart chart_from_json(const json& j) {
  try {
    require(j.value("format", "") == "zikq-chart", ErrorKind::DataError, "not a chart document");
    require(j.at("version").get<int>() == chart_format_version, ErrorKind::DataError,
            "unsupported chart version");
    CentileChart chart;
    chart.tau_levels = j.at("tau_levels").get<std::vector<double>>();
    chart.age_grid = j.at("age_grid").get<std::vector<double>>();
    for (const auto& row : j.at("values")) {
      std::vector<std::optional<double>> level;
      for (const auto& v : row) level.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      require(level.size() == chart.age_grid.size(), ErrorKind::DataError, "chart row length mismatch");
      chart.values.push_back(std::move(level));
    }
    require(chart.values.size() == chart.tau_levels.size(), ErrorKind::DataError,
            "chart level count mismatch");
    chart.survival.knots = j.at("survival").at("knots").get<std::vector<double>>();
    chart.survival.values = j.at("survival").at("values").get<std::vector<double>>();
    require(chart.survival.knots.size() == chart.survival.values.size() && !chart.survival.knots.empty(),
            ErrorKind::DataError, "malformed survival curve");
    chart.h_mean = j.at("h_mean").get<double>();
    chart.config = config_from_json(j.at("config"));
    return chart;
  } catch (const json::exception& e) {
    fail(ErrorKind::DataError, std::string("malformed chart document: ") + e.what());
  }
}

inline void write_json(const json& j, std::ostream& out) { out << j.dump(2) << '\n'; }

inline json read_json(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::DataError, "'" + path + "': " + e.what());
  }
}

// --- truth models ---------------------------------------------------------

inline PiecewiseLinear table_from_json(const json& j, const char* name) {
  PiecewiseLinear t;
  for (const auto& p : j) {
    require(p.is_array() && p.size() == 2, ErrorKind::DataError,
            std::string(name) + ": breakpoints must be [age, value] pairs");
    t.points.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return t;
}

inline json table_to_json(const PiecewiseLinear& t) {
  json j = json::array();
  for (const auto& [x, y] : t.points) j.push_back({x, y});
  return j;
}

/// {"survival": [[age, S], ...], "q_max": [[age, Q], ...], and either
/// "q_min": [[age, Q], ...] or "q_min_ratio": r meaning Q_min = r * Q_max}.
inline TruthModel truth_from_json(const json& j) {
  try {
    TruthModel m;
    m.survival = table_from_json(j.at("survival"), "survival");
    m.q_max = table_from_json(j.at("q_max"), "q_max");
    if (j.contains("q_min")) {
      m.q_min = table_from_json(j.at("q_min"), "q_min");
    } else {
      const double r = j.at("q_min_ratio").get<double>();
      m.q_min = m.q_max;
      for (auto& p : m.q_min.points) p.second *= r;
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::DataError, std::string("malformed truth model: ") + e.what());
  }
}

inline json truth_to_json(const TruthModel& m) {
  return {{"survival", table_to_json(m.survival)},
          {"q_min", table_to_json(m.q_min)},
          {"q_max", table_to_json(m.q_max)}};
}

// --- reports --------------------------------------------------------------

inline std::string percent_label(double tau) {
  return fmt(std::round(tau * 1e6) / 1e4) + "%";
}

/// One row per method and one column per level, like a journal RMSE table.
inline void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, std::ostream& out) {
  out << "method";
  for (const auto& r : rows) out << ',' << percent_label(r.tau);
  out << "\nZIKQ";
  for (const auto& r : rows) out << ',' << fmt(r.rmse_zikq);
  out << "\nnaive";
  for (const auto& r : rows) out << ',' << fmt(r.rmse_naive);
  out << '\n';
}

inline void write_ranked_csv(const std::vector<Visit>& visits, const std::vector<RankResult>& ranks,
                             std::ostream& out) {
  out << "subject_id,age,score,rank,flag\n";
  for (std::size_t i = 0; i < visits.size(); ++i) {
    out << visits[i].subject_id << ',' << fmt(visits[i].age) << ',' << fmt(visits[i].score) << ','
        << fmt(ranks[i].rank) << ',' << zikq::to_string(ranks[i].flag) << '\n';
  }
}

inline json efficacy_to_json(const EfficacyAssessment& a) {
  json changes = json::array();
  for (const auto& c : a.changes) {
    changes.push_back({{"subject_id", c.subject_id},
                       {"baseline_rank", c.baseline_rank},
                       {"endpoint_rank", c.endpoint_rank},
                       {"change", c.change}});
  }
  return {{"n_reduced", a.test.n_reduced}, {"W", a.test.W},
          {"sigma_w", a.test.sigma_w},     {"z", a.test.z},
          {"p", a.test.p},                 {"small_sample", a.test.small_sample},
          {"changes", changes}};
}

inline void write_efficacy_text(const EfficacyAssessment& a, std::ostream& out) {
  const auto& t = a.test;
  out << "Wilcoxon signed-rank test on percentile-rank change (H_a: E(D) > 0)\n"
      << "  subjects:        " << a.changes.size() << '\n'
      << "  nonzero changes: " << t.n_reduced << '\n'
      << "  W:               " << fmt(t.W) << '\n'
      << "  sigma_W:         " << fmt(t.sigma_w) << '\n'
      << "  z:               " << fmt(t.z) << '\n'
      << "  one-sided p:     " << fmt(t.p) << '\n';
  if (t.small_sample) out << "  warning: N_r <= 20, normal approximation is rough\n";
}

inline void write_eligibility_csv(const std::vector<Visit>& visits, const std::vector<Eligibility>& res,
                                  std::optional<double> fixed_threshold, std::ostream& out) {
  out << "subject_id,age,score,rank,threshold,eligible";
  if (fixed_threshold) out << ",fixed_eligible";
  out << ",flags\n";
  for (std::size_t i = 0; i < visits.size(); ++i) {
    const auto& e = res[i];
    out << visits[i].subject_id << ',' << fmt(visits[i].age) << ',' << fmt(visits[i].score) << ','
        << fmt(e.rank) << ',' << fmt(e.threshold) << ',' << (e.eligible ? 1 : 0);
    if (fixed_threshold) out << ',' << (visits[i].score > 0.0 && visits[i].score >= *fixed_threshold ? 1 : 0);
    std::string flags = zikq::to_string(e.flag);
    if (e.age_clamped) flags += ";age-clamped";
    if (e.horizon_clamped) flags += ";horizon-clamped";
    out << ',' << flags << '\n';
  }
}

inline void write_enrollment_csv(const EnrollmentReport& rep, std::ostream& out) {
  out << "age_bin,n,rate_proposed,rate_fixed\n";
  for (const auto& b : rep.bins) {
    out << fmt(b.age_lo) << '-' << fmt(b.age_lo + 1.0) << ',' << b.n << ',' << fmt(b.rate_proposed)
        << ',' << fmt(b.rate_fixed) << '\n';
  }
  out << "overall," << rep.overall.n << ',' << fmt(rep.overall.rate_proposed) << ','
      << fmt(rep.overall.rate_fixed) << '\n';
}

}  // namespace zikq::io
