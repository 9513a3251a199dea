// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "zikq/zikq.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

const std::vector<double> kLevels = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

// Every chart fitted here is also checked for the zero-threshold invariant.
std::size_t g_charts_checked = 0;
std::size_t g_zero_violations = 0;

const zikq::CentileChart& audit(const zikq::CentileChart& chart) {
  ++g_charts_checked;
  g_zero_violations += oracle::zero_threshold_violations(chart);
  return chart;
}

std::string num(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Verdict solver_oracle() {
  const auto t0 = Clock::now();
  zikq::Rng rng(101);
  double worst = 0.0;
  for (int w = 0; w < 200; ++w) {
    const int m = rng.uniform_int(2, 30);
    std::vector<zikq::AgeScore> pts;
    for (int i = 0; i < m; ++i) {
      // quarter of the windows get tied ages and tied scores
      const double age = w % 4 == 0 ? 5.0 + 0.5 * rng.uniform_int(0, 4) : rng.uniform(5.0, 7.0);
      const double score = w % 4 == 0 ? static_cast<double>(rng.uniform_int(1, 6)) : rng.uniform(0.0, 30.0);
      pts.push_back({age, score});
    }
    const double tau = 0.1 * rng.uniform_int(1, 9);
    const double h = 1.01;  // covers [5, 7] from the center
    const auto window = zikq::kernel_window(pts, 6.0, h, zikq::Kernel::Epanechnikov);
    const auto fit = zikq::local_linear_fit(pts, 6.0, tau, h, zikq::Kernel::Epanechnikov);
    const double f = zikq::check_objective(window, fit.a, fit.b, tau);
    const double ref = oracle::brute_force_check_min(window, tau);
    worst = std::max(worst, std::abs(f - ref));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 5.0,
          "max |objective - brute force| = " + num(worst, 12) + ", " + num(secs) + " s"};
}

Verdict km_oracle() {
  // Fully observed: common entry at grid age 0, every subject followed to its event.
  zikq::Rng rng(202);
  double worst_exact = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int n = rng.uniform_int(5, 200);
    const int R = rng.uniform_int(3, 25);
    std::vector<double> grid(R);
    for (int r = 0; r < R; ++r) grid[r] = 4.0 + 0.5 * r;
    zikq::LifeCourseDataset data;
    std::vector<int> event_index;
    for (int i = 0; i < n; ++i) {
      const int e = rng.uniform_int(1, R - 1);
      event_index.push_back(e);
      zikq::SubjectRecord s{zikq::subject_label(i, n), {}};
      for (int r = 0; r < e; ++r) s.visits.push_back({grid[r], 1.0 + r});
      s.visits.push_back({grid[e], 0.0});
      data.subjects.push_back(std::move(s));
    }
    for (auto rule : {zikq::RiskSetRule::Observed, zikq::RiskSetRule::DelayedEntry}) {
      const auto S = zikq::km_estimate(zikq::build_risk_table(data, grid, rule));
      for (int r = 0; r < R; ++r) {
        const double ecdf = static_cast<double>(std::count_if(event_index.begin(), event_index.end(),
                                                              [&](int e) { return e <= r; })) / n;
        worst_exact = std::max(worst_exact, std::abs((1.0 - S.values[r]) - ecdf));
      }
    }
  }

  // Censored: common entry at 4, uniform censoring, truth survival of the default model.
  const auto truth = zikq::TruthModel::default_model();
  double worst_sup[2] = {0.0, 0.0};
  std::vector<double> grid;
  for (double a = 4.0; a <= 30.0 + 1e-9; a += 0.5) grid.push_back(a);
  for (int c = 0; c < 10; ++c) {
    const auto data = oracle::common_entry_cohort(truth, 2000, 4.0, 30.0, 0.5, zikq::Rng::derive(303, c), true);
    for (int k = 0; k < 2; ++k) {
      const auto rule = k == 0 ? zikq::RiskSetRule::Observed : zikq::RiskSetRule::DelayedEntry;
      const auto S = zikq::km_estimate(zikq::build_risk_table(data, grid, rule));
      for (std::size_t r = 0; r < grid.size(); ++r)
        worst_sup[k] = std::max(worst_sup[k], std::abs(S.values[r] - truth.s(grid[r])));
    }
  }
  // Rounding in the running product is the only source of difference in the exact part.
  return {worst_exact <= 1e-12 && worst_sup[0] < 0.05 && worst_sup[1] < 0.05,
          "fully observed max |1-S - ECDF| = " + num(worst_exact, 15) + "; censored n=2000 worst sup error over 10 cohorts: " +
              num(worst_sup[0], 4) + " observed rule, " + num(worst_sup[1], 4) + " delayed-entry rule"};
}

Verdict benchmark_against_naive() {
  const auto t0 = Clock::now();
  const auto truth = zikq::TruthModel::default_model();
  zikq::CohortConfig cc;
  cc.n = 1000;
  cc.seed = 20240401;
  const auto rows = zikq::rmse_benchmark(truth, cc, kLevels, 50);
  bool every_level = true;
  double mid_z = 0.0, mid_n = 0.0;
  std::string zrow = "ZIKQ", nrow = "naive";
  for (const auto& r : rows) {
    every_level = every_level && r.rmse_zikq < r.rmse_naive;
    if (r.tau > 0.25 && r.tau < 0.75) {
      mid_z += r.rmse_zikq / 5.0;
      mid_n += r.rmse_naive / 5.0;
    }
    zrow += " " + num(r.rmse_zikq, 2);
    nrow += " " + num(r.rmse_naive, 2);
  }
  const double secs = seconds_since(t0);
  return {every_level && mid_z < 0.5 * mid_n && secs < 600.0,
          zrow + " | " + nrow + " | 30-70% mean " + num(mid_z, 2) + " vs 0.5 x " + num(mid_n, 2) + ", " +
              num(secs, 1) + " s"};
}

// Median over interior ages of |Q - Q_true| at tau = 0.5, averaged over replicates.
Verdict consistency_trend() {
  const auto truth = zikq::TruthModel::default_model();
  std::vector<double> ages;
  for (double a = 5.0; a <= 14.0 + 1e-9; a += 0.5) ages.push_back(a);
  const std::vector<double> level = {0.5};
  std::vector<double> means;
  for (std::size_t n : {500, 1000, 2000, 4000}) {
    double total = 0.0;
    for (int r = 0; r < 20; ++r) {
      zikq::CohortConfig cc;
      cc.n = n;
      cc.seed = zikq::Rng::derive(505 + n, r);
      const auto chart = audit(zikq::build_chart(zikq::generate_cohort(truth, cc), level, ages, {}));
      std::vector<double> err;
      for (std::size_t a = 0; a < ages.size(); ++a)
        if (chart.values[0][a]) err.push_back(std::abs(*chart.values[0][a] - truth.quantile(0.5, ages[a])));
      std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
      total += err[err.size() / 2];
    }
    means.push_back(total / 20.0);
  }
  bool ok = true;
  std::string detail = "median abs error by n (500,1000,2000,4000):";
  for (double m : means) detail += " " + num(m, 3);
  detail += "; ratios";
  for (std::size_t i = 1; i < means.size(); ++i) {
    ok = ok && means[i] / means[i - 1] < 1.0;
    detail += " " + num(means[i] / means[i - 1], 3);
  }
  return {ok, detail};
}

Verdict wilcoxon_size_power() {
  zikq::Rng rng(606);
  int rejections = 0;
  for (int s = 0; s < 2000; ++s) {
    std::vector<double> d(30);
    for (auto& v : d) v = 0.1 * rng.normal();
    rejections += zikq::wilcoxon_signed_rank(d).p < 0.05;
  }
  const double size = rejections / 2000.0;
  int hits = 0;
  for (int s = 0; s < 2000; ++s) {
    std::vector<double> d(50);
    for (auto& v : d) v = 0.1 + 0.1 * rng.normal();
    hits += zikq::wilcoxon_signed_rank(d).p < 0.05;
  }
  const double power = hits / 2000.0;
  return {size >= 0.035 && size <= 0.065 && power > 0.8,
          "null rejection rate " + num(size, 4) + " (N_r=30), power " + num(power, 4) + " (n=50)"};
}

Verdict screening_dominance() {
  const auto truth = zikq::TruthModel::default_model();
  zikq::CohortConfig cc;
  cc.seed = 707;
  const auto cohort = zikq::generate_cohort(truth, cc);
  const auto chart = audit(zikq::build_chart(cohort, kLevels, zikq::chart_grid(cohort, 0.5), {}));
  const auto rep = zikq::enrollment_report(cohort, chart, 2.0, 17.0);
  bool ok = rep.overall.rate_proposed > rep.overall.rate_fixed;
  std::string detail = "overall " + num(rep.overall.rate_proposed) + " vs " + num(rep.overall.rate_fixed) + "; bins";
  for (const auto& b : rep.bins) {
    detail += " [" + num(b.age_lo, 0) + "] " + num(b.rate_proposed, 2) + "/" + num(b.rate_fixed, 2);
    if (b.rate_fixed < 1.0) ok = ok && b.rate_proposed > b.rate_fixed;
  }
  return {ok, detail};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

Verdict equivariance() {
  const auto truth = zikq::TruthModel::default_model();
  double worst_scale = 0.0, worst_shift = 0.0;
  std::size_t mismatched_missing = 0;
  zikq::Rng rng(808);
  for (int c = 0; c < 20; ++c) {
    zikq::CohortConfig cc;
    cc.n = static_cast<std::size_t>(rng.uniform_int(300, 1200));
    cc.seed = zikq::Rng::derive(808, c);
    const auto data = zikq::generate_cohort(truth, cc);
    const auto ages = zikq::chart_grid(data, 0.5);
    zikq::EstimatorConfig cfg;
    const auto base = audit(zikq::build_chart(data, kLevels, ages, cfg));

    const double k = rng.uniform(0.2, 5.0);
    auto scaled = data;
    for (auto& s : scaled.subjects)
      for (auto& v : s.visits) v.score *= k;
    auto cfg_scaled = cfg;
    cfg_scaled.c0 = cfg.c0 * k;
    const auto cs = audit(zikq::build_chart(scaled, kLevels, ages, cfg_scaled));

    const double shift = static_cast<double>(rng.uniform_int(-3, 6));  // whole years keep grid alignment
    auto moved = data;
    for (auto& s : moved.subjects)
      for (auto& v : s.visits) v.age += shift;
    auto moved_ages = ages;
    for (auto& a : moved_ages) a += shift;
    const auto cm = audit(zikq::build_chart(moved, kLevels, moved_ages, cfg));

    for (std::size_t l = 0; l < kLevels.size(); ++l)
      for (std::size_t a = 0; a < ages.size(); ++a) {
        const auto &v = base.values[l][a], &vs = cs.values[l][a], &vm = cm.values[l][a];
        if (v.has_value() != vs.has_value() || v.has_value() != vm.has_value()) {
          ++mismatched_missing;
          continue;
        }
        if (!v) continue;
        worst_scale = std::max(worst_scale, rel_err(*vs, k * *v));
        worst_shift = std::max(worst_shift, rel_err(*vm, *v));
      }
  }
  return {worst_scale <= 1e-8 && worst_shift <= 1e-8 && mismatched_missing == 0,
          "max relative error: score scale " + num(worst_scale, 12) + ", age shift " + num(worst_shift, 12) +
              ", missing-pattern mismatches " + std::to_string(mismatched_missing)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict cli_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "zikq_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = ZIKQ_CLI_PATH;
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  auto p = [&](const std::string& name) { return "\"" + (dir / name).string() + "\""; };

  bool ran = true;
  for (int rep = 0; rep < 2; ++rep)
    for (int threads : {1, 4}) {
      const std::string tag = std::to_string(rep) + "_" + std::to_string(threads);
      const std::string t = " --threads " + std::to_string(threads);
      ran = ran && run("simulate --n 800 --seed 99 --jitter-sd 0.05 --out " + p("cohort_" + tag + ".csv"));
      ran = ran && run("fit --input " + p("cohort_" + tag + ".csv") + t + " --out-csv " + p("chart_" + tag + ".csv") +
                       " --out-json " + p("chart_" + tag + ".json") + " --survival-csv " + p("surv_" + tag + ".csv"));
      ran = ran && run("benchmark --n 300 --replicates 3 --seed 5" + t + " --out " + p("bench_" + tag + ".csv"));
      ran = ran && run("rank --chart " + p("chart_" + tag + ".json") + " --visits " + p("cohort_" + tag + ".csv") +
                       " --out " + p("rank_" + tag + ".csv"));
      ran = ran && run("screen --chart " + p("chart_" + tag + ".json") + " --baselines " +
                       p("cohort_" + tag + ".csv") + " --delta-t 2 --fixed-threshold 17 --out " +
                       p("elig_" + tag + ".csv") + " --report " + p("enroll_" + tag + ".csv"));
      ran = ran && run("plot --chart " + p("chart_" + tag + ".json") + " --out " + p("plot_" + tag + ".svg"));
    }
  if (!ran) return {false, "a CLI pipeline step failed to run"};

  std::size_t compared = 0, differing = 0;
  const std::vector<std::pair<std::string, std::string>> outputs = {
      {"cohort_", ".csv"}, {"chart_", ".csv"}, {"chart_", ".json"}, {"surv_", ".csv"}, {"bench_", ".csv"},
      {"rank_", ".csv"},   {"elig_", ".csv"},  {"enroll_", ".csv"},  {"plot_", ".svg"}};
  for (const auto& [stem, ext] : outputs) {
    const std::string ref = slurp(dir / (stem + "0_1" + ext));
    for (const char* tag : {"0_4", "1_1", "1_4"}) {
      ++compared;
      if (ref.empty() || slurp(dir / (stem + tag + ext)) != ref) ++differing;
    }
  }
  fs::remove_all(dir);
  return {differing == 0, std::to_string(compared) + " output pairs compared (2 runs x threads 1/4), " +
                              std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"solver oracle", solver_oracle},
      {"survival oracle", km_oracle},
      {"benchmark vs naive", benchmark_against_naive},
      {"zero-threshold exactness", [] { return Verdict{}; }},  // filled after the others run
      {"consistency trend", consistency_trend},
      {"signed-rank size and power", wilcoxon_size_power},
      {"screening dominance", screening_dominance},
      {"equivariance", equivariance},
      {"CLI determinism", cli_determinism},
  };
  std::vector<Verdict> verdicts(criteria.size());
  for (std::size_t i = 0; i < criteria.size(); ++i)
    if (i != 3) verdicts[i] = criteria[i].second();
  verdicts[3] = {g_zero_violations == 0 && g_charts_checked > 0,
                 std::to_string(g_charts_checked) + " charts, " + std::to_string(g_zero_violations) + " violations"};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::cout << "criterion " << i + 1 << " [" << (verdicts[i].pass ? "PASS" : "FAIL") << "] " << criteria[i].first
              << ": " << verdicts[i].detail << '\n';
    failed += !verdicts[i].pass;
  }
  return failed == 0 ? 0 : 1;
}
