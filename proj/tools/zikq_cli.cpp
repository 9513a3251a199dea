// zikq: reference centile charts for outcomes with an absorbing zero state.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zikq/zikq.hpp"

namespace {

using zikq::ErrorKind;
using zikq::io::json;

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return kUsage;
    case ErrorKind::NumericFailure: return kNumeric;
    default: return kData;
  }
}

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

// Flags left unset fall back to the --config document, then to defaults.
struct Settings {
  std::string config_path;
  json config = json::object();

  std::optional<double> c0, tau_clamp_eps, bandwidth, grid_step, delta_t, fixed_threshold, visit_gap,
      jitter_sd, age_min, age_max;
  std::optional<std::string> kernel, risk_set, levels;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n, replicates;
  std::optional<unsigned> threads;
  bool rearrange = false;

  std::string input, out_csv, out_json, out, chart, visits, truth, overlay, report, survival_csv, title;

  template <class T>
  T pick(const std::optional<T>& flag, const char* key, T fallback) const {
    if (flag) return *flag;
    if (config.contains(key)) return config.at(key).get<T>();
    return fallback;
  }

  void load() {
    if (config_path.empty()) return;
    config = zikq::io::read_json(config_path);
    zikq::require(config.is_object(), ErrorKind::DataError, "config must be a JSON object");
  }

  zikq::EstimatorConfig estimator() const {
    zikq::EstimatorConfig c = zikq::io::config_from_json(config);
    if (config.contains("bandwidth") && !config.at("bandwidth").is_null())
      c.bandwidth_override = config.at("bandwidth").get<double>();
    if (c0) c.c0 = *c0;
    if (tau_clamp_eps) c.tau_clamp_eps = *tau_clamp_eps;
    if (bandwidth) c.bandwidth_override = *bandwidth;
    if (grid_step) c.grid_step = *grid_step;
    if (kernel) c.kernel = zikq::parse_kernel(*kernel);
    if (risk_set) c.risk_set = zikq::io::parse_risk_set(*risk_set);
    if (rearrange) c.rearrange = true;
    c.threads = pick<unsigned>(threads, "threads", 1u);
    c.validate();
    return c;
  }

  std::vector<double> tau_levels() const {
    std::vector<double> out;
    if (!levels && config.contains("levels") && config.at("levels").is_array())
      return config.at("levels").get<std::vector<double>>();
    std::stringstream ss(pick<std::string>(levels, "levels", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"));
    std::string item;
    while (std::getline(ss, item, ','))
      out.push_back(zikq::io::parse_number(zikq::io::trim(item), 0, "level"));
    return out;
  }

  std::uint64_t resolve_seed() const {
    if (seed) return *seed;
    if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << s << '\n';
    return s;
  }

  zikq::TruthModel truth_model() const {
    if (truth.empty()) return zikq::TruthModel::default_model();
    return zikq::io::truth_from_json(zikq::io::read_json(truth));
  }

  zikq::CohortConfig cohort(std::uint64_t s) const {
    zikq::CohortConfig c;
    c.n = pick<std::size_t>(n, "n", c.n);
    c.visit_gap = pick<double>(visit_gap, "visit_gap", c.visit_gap);
    c.seed = s;
    return c;
  }
};

template <class Fn>
void write_file(const std::string& path, Fn&& fn) {
  auto out = zikq::io::open_output(path);
  fn(out);
  zikq::require(out.good(), ErrorKind::DataError, "failed writing '" + path + "'");
}

zikq::CentileChart load_chart(const std::string& path) {
  return zikq::io::chart_from_json(zikq::io::read_json(path));
}

std::vector<zikq::Visit> load_visits(const std::string& path) {
  auto in = zikq::io::open_input(path);
  return zikq::io::parse_visits_csv(in);
}

void run_fit(const Settings& s) {
  const auto config = s.estimator();
  const auto data = zikq::io::read_cohort_csv(s.input, s.pick<double>(s.visit_gap, "visit_gap", 0.5));
  zikq::require(!s.out_csv.empty() || !s.out_json.empty(), ErrorKind::InvalidParameter,
                "fit needs --out-csv and/or --out-json");
  std::vector<double> ages = zikq::chart_grid(data, config.grid_step);
  if (s.age_min || s.age_max) {
    const double lo = s.age_min.value_or(ages.front());
    const double hi = s.age_max.value_or(ages.back());
    zikq::require(hi >= lo, ErrorKind::InvalidParameter, "--age-max must not be below --age-min");
    ages.clear();
    for (long k = 0; lo + config.grid_step * static_cast<double>(k) <= hi + 1e-9; ++k)
      ages.push_back(lo + config.grid_step * static_cast<double>(k));
  }
  const auto chart = zikq::build_chart(data, s.tau_levels(), ages, config);
  if (!s.out_csv.empty()) write_file(s.out_csv, [&](std::ostream& o) { zikq::io::write_chart_csv(chart, o); });
  if (!s.out_json.empty())
    write_file(s.out_json, [&](std::ostream& o) { zikq::io::write_json(zikq::io::chart_to_json(chart), o); });
  if (!s.survival_csv.empty())
    write_file(s.survival_csv, [&](std::ostream& o) { zikq::io::write_survival_csv(chart.survival, o); });
}

void run_simulate(const Settings& s) {
  const auto truth = s.truth_model();
  const std::uint64_t seed = s.resolve_seed();
  auto cohort = zikq::generate_cohort(truth, s.cohort(seed));
  const double jitter = s.pick<double>(s.jitter_sd, "jitter_sd", 0.0);
  cohort = zikq::irregular_grid_variant(cohort, jitter, zikq::Rng::derive(seed, 0xA6E5));
  write_file(s.out, [&](std::ostream& o) { zikq::io::write_cohort_csv(cohort, o); });
}

void run_benchmark(const Settings& s) {
  const auto truth = s.truth_model();
  const std::uint64_t seed = s.resolve_seed();
  zikq::BenchmarkOptions opt;
  opt.estimator = s.estimator();
  opt.threads = opt.estimator.threads;
  const auto rows = zikq::rmse_benchmark(truth, s.cohort(seed), s.tau_levels(),
                                         s.pick<std::size_t>(s.replicates, "replicates", 50), opt);
  write_file(s.out, [&](std::ostream& o) { zikq::io::write_benchmark_csv(rows, o); });
}

void run_rank(const Settings& s) {
  const auto chart = load_chart(s.chart);
  const auto visits = load_visits(s.visits);
  std::vector<zikq::RankResult> ranks;
  for (const auto& v : visits) ranks.push_back(zikq::rank_of(chart, v.age, v.score));
  write_file(s.out, [&](std::ostream& o) { zikq::io::write_ranked_csv(visits, ranks, o); });
}

void run_efficacy(const Settings& s) {
  const auto chart = load_chart(s.chart);
  auto in = zikq::io::open_input(s.visits);
  const auto paired = zikq::io::parse_efficacy_csv(in);
  const auto result = zikq::assess_efficacy(chart, paired.baseline, paired.endpoint);
  zikq::io::write_efficacy_text(result, std::cout);
  if (!s.out_json.empty())
    write_file(s.out_json, [&](std::ostream& o) { zikq::io::write_json(zikq::io::efficacy_to_json(result), o); });
}

void run_screen(const Settings& s) {
  const auto chart = load_chart(s.chart);
  const auto visits = load_visits(s.visits);
  const double delta_t = s.pick<double>(s.delta_t, "delta_t", 2.0);
  std::optional<double> fixed = s.fixed_threshold;
  if (!fixed && s.config.contains("fixed_threshold")) fixed = s.config.at("fixed_threshold").get<double>();
  std::vector<zikq::Eligibility> res;
  for (const auto& v : visits) res.push_back(zikq::screen_eligibility(chart, v.age, v.score, delta_t));
  write_file(s.out, [&](std::ostream& o) { zikq::io::write_eligibility_csv(visits, res, fixed, o); });
  if (!s.report.empty()) {
    zikq::require(fixed.has_value(), ErrorKind::InvalidParameter, "--report needs --fixed-threshold");
    zikq::LifeCourseDataset baselines;
    for (const auto& v : visits) baselines.subjects.push_back({v.subject_id, {{v.age, v.score}}});
    const auto rep = zikq::enrollment_report(baselines, chart, delta_t, *fixed);
    write_file(s.report, [&](std::ostream& o) { zikq::io::write_enrollment_csv(rep, o); });
  }
}

void run_plot(const Settings& s) {
  const auto chart = load_chart(s.chart);
  zikq::SvgOptions opt;
  if (!s.title.empty()) opt.title = s.title;
  if (!s.overlay.empty()) {
    const auto data = zikq::io::read_cohort_csv(s.overlay);
    for (const auto& subject : data.subjects) {
      zikq::Trajectory t{subject.id, {}};
      for (const auto& v : subject.visits) t.points.emplace_back(v.age, v.score);
      opt.overlays.push_back(std::move(t));
    }
  }
  const std::string svg = zikq::render_chart_svg(chart, opt);
  write_file(s.out, [&](std::ostream& o) { o << svg; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-inflated kernel quantile reference centile charts"};
  app.require_subcommand(1);
  app.fallthrough();  // --config may follow the subcommand
  Settings s;
  app.add_option("--config", s.config_path, "JSON document of default settings")->check(CLI::ExistingFile);

  auto estimator_flags = [&](CLI::App* sub) {
    sub->add_option("--c0", s.c0, "Score below which a zero is imputed one visit later");
    sub->add_option("--kernel", s.kernel, "epanechnikov | gaussian");
    sub->add_option("--tau-clamp", s.tau_clamp_eps, "Bound keeping calibrated levels in [eps, 1-eps]");
    sub->add_option("--bandwidth", s.bandwidth, "Pin h_mean instead of the plug-in");
    sub->add_option("--grid-step", s.grid_step, "Age grid step in years");
    sub->add_option("--risk-set", s.risk_set, "delayed-entry | observed");
    sub->add_option("--levels", s.levels, "Comma-separated quantile levels");
    sub->add_option("--threads", s.threads, "Worker threads");
    sub->add_flag("--rearrange", s.rearrange, "Sort each age column across levels");
  };

  auto* fit = app.add_subcommand("fit", "Fit a centile chart to a cohort CSV");
  fit->add_option("--input", s.input, "Cohort CSV (subject_id,age,score)")->required();
  fit->add_option("--out-csv", s.out_csv, "Chart CSV");
  fit->add_option("--out-json", s.out_json, "Chart JSON");
  fit->add_option("--survival-csv", s.survival_csv, "Survival curve CSV (knot,value)");
  fit->add_option("--visit-gap", s.visit_gap, "Years between scheduled visits");
  fit->add_option("--age-min", s.age_min, "First chart age");
  fit->add_option("--age-max", s.age_max, "Last chart age");
  estimator_flags(fit);

  auto* sim = app.add_subcommand("simulate", "Simulate a natural-history cohort");
  sim->add_option("--truth", s.truth, "Truth model JSON (default: built-in model)");
  sim->add_option("--n", s.n, "Number of subjects");
  sim->add_option("--seed", s.seed, "Random seed");
  sim->add_option("--visit-gap", s.visit_gap, "Years between visits");
  sim->add_option("--jitter-sd", s.jitter_sd, "Visit-age jitter sd in years");
  sim->add_option("--out", s.out, "Cohort CSV")->required();

  auto* bench = app.add_subcommand("benchmark", "RMSE of calibrated vs naive charts against a truth model");
  bench->add_option("--truth", s.truth, "Truth model JSON (default: built-in model)");
  bench->add_option("--n", s.n, "Subjects per replicate");
  bench->add_option("--replicates", s.replicates, "Monte Carlo replicates");
  bench->add_option("--seed", s.seed, "Master random seed");
  bench->add_option("--out", s.out, "Benchmark CSV")->required();
  estimator_flags(bench);

  auto* rank = app.add_subcommand("rank", "Percentile ranks of visits on a chart");
  rank->add_option("--chart", s.chart, "Chart JSON")->required();
  rank->add_option("--visits", s.visits, "Visits CSV (subject_id,age,score)")->required();
  rank->add_option("--out", s.out, "Ranked CSV")->required();

  auto* eff = app.add_subcommand("test-efficacy", "Signed-rank test on percentile-rank changes");
  eff->add_option("--chart", s.chart, "Chart JSON")->required();
  eff->add_option("--visits", s.visits, "Paired CSV (subject_id,phase,age,score)")->required();
  eff->add_option("--out-json", s.out_json, "Result JSON");

  auto* screen = app.add_subcommand("screen", "Age-dependent enrollment screening");
  screen->add_option("--chart", s.chart, "Chart JSON")->required();
  screen->add_option("--baselines", s.visits, "Baseline CSV (subject_id,age,score)")->required();
  screen->add_option("--delta-t", s.delta_t, "Planned trial duration in years");
  screen->add_option("--fixed-threshold", s.fixed_threshold, "Fixed minimum score for comparison");
  screen->add_option("--out", s.out, "Eligibility CSV")->required();
  screen->add_option("--report", s.report, "Per-age-bin enrollment CSV");

  auto* plot = app.add_subcommand("plot", "Render a chart as SVG");
  plot->add_option("--chart", s.chart, "Chart JSON")->required();
  plot->add_option("--overlay", s.overlay, "Trajectories CSV (subject_id,age,score)");
  plot->add_option("--title", s.title, "Plot title");
  plot->add_option("--out", s.out, "SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kUsage;
  }

  try {
    s.load();
    if (*fit) run_fit(s);
    else if (*sim) run_simulate(s);
    else if (*bench) run_benchmark(s);
    else if (*rank) run_rank(s);
    else if (*eff) run_efficacy(s);
    else if (*screen) run_screen(s);
    else if (*plot) run_plot(s);
  } catch (const zikq::Error& e) {
    report_error(zikq::to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    report_error("data-error", e.what());
    return kData;
  }
  return kOk;
}
