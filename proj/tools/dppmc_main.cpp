// Command-line driver: `run` executes an experiment config, `theory-check`
// runs the variance-reduction verification battery, `plot` renders a records
// CSV to SVG curves. Exit codes: 0 success, 1 config/usage error, 2 runtime
// failure, 3 failed theory checks.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dppmc/benchmarks.hpp"
#include "dppmc/config.hpp"
#include "dppmc/experiment.hpp"
#include "dppmc/svg.hpp"
#include "dppmc/theory_checks.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_csv(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::string token;
  std::istringstream in(csv);
  while (std::getline(in, token, ',')) {
    token = dppmc::detail::config_trim(token);
    if (token.empty()) continue;
    try {
      seeds.push_back(std::stoull(token));
    } catch (const std::exception&) {
      throw dppmc::ConfigError("--seeds: invalid seed '" + token + "'");
    }
  }
  if (seeds.empty()) throw dppmc::ConfigError("--seeds: no seeds given");
  return seeds;
}

void require_distinct(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw dppmc::ConfigError("seeds must be distinct");
}

int do_run(const std::string& config_path, const std::string& out_dir,
           const std::string& seeds_csv, int jobs) {
  dppmc::ExperimentConfig cfg = dppmc::load_config_file(config_path);
  dppmc::apply_seed_override(&cfg);
  if (!seeds_csv.empty()) cfg.seeds = parse_seed_csv(seeds_csv);
  require_distinct(cfg.seeds);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (jobs < 1) throw dppmc::ConfigError("--jobs must be at least 1");

  const dppmc::ExperimentResult result = dppmc::run_experiment(cfg, jobs);
  dppmc::write_experiment_outputs(result, cfg);

  if (cfg.budget == 0)
    std::cerr << "warning: budget is 0, nothing was run\n";
  for (const std::string& f : result.failures)
    std::cerr << "task failed: " << f << "\n";
  std::cout << "kind=" << cfg.kind << " digest=" << result.digest
            << " records=" << result.records.size() << " out=" << cfg.output_dir
            << "\n";
  return result.failures.empty() ? 0 : 2;
}

struct CheckLine {
  std::string name;
  bool passed = false;
  nlohmann::json detail;
};

std::vector<CheckLine> run_theory_battery() {
  using namespace dppmc;
  std::vector<CheckLine> lines;

  const auto canonical_spec = []() {
    DownsampledEstimatorSpec spec;
    spec.values = Eigen::MatrixXd::Ones(4, 1);
    spec.probabilities = Eigen::VectorXd::Constant(4, 0.5);
    return spec;
  };

  {
    Rng rng = make_rng(19);
    const Theorem1Report r = verify_theorem_1(canonical_spec(), 20000, rng);
    lines.push_back(
        {"theorem_1_scalar", r.passed,
         {{"var_iid", r.var_iid},
          {"var_dpp_closed_form", r.var_dpp_closed_form},
          {"var_dpp_empirical", r.var_dpp_empirical},
          {"epsilon", r.epsilon},
          {"variance_strictly_reduced", r.variance_strictly_reduced},
          {"empirical_within_three_se", r.empirical_within_three_se},
          {"mean_within_three_se", r.mean_within_three_se}}});
  }

  const auto corollary = [&lines](const char* name, double (*f)(
                                      const Eigen::VectorXd&),
                                  std::uint64_t seed) {
    Rng rng = make_rng(seed);
    const int d = 2, n = 5;
    const Theorem1Report r = verify_corollary_es(
        d, n, [f](const Eigen::VectorXd& x) { return f(x); },
        Eigen::VectorXd::Ones(d), 0.1, 0.5, 20000, rng);
    lines.push_back({name, r.passed,
                     {{"var_iid", r.var_iid},
                      {"var_dpp_closed_form", r.var_dpp_closed_form},
                      {"var_dpp_empirical", r.var_dpp_empirical},
                      {"epsilon", r.epsilon}}});
  };
  corollary("corollary_es_sphere", sphere, 101);
  corollary("corollary_es_rosenbrock", rosenbrock, 202);

  {
    DownsampledEstimatorSpec spec = canonical_spec();
    spec.weights = Eigen::VectorXd::Ones(4);
    Rng rng = make_rng(7);
    const BiasedReport r = verify_biased_theorem(spec, 20000, rng);
    lines.push_back({"biased_downsampling", r.passed,
                     {{"var_iid", r.var_iid},
                      {"var_dpp", r.var_dpp},
                      {"mse_iid", r.mse_iid},
                      {"mse_dpp", r.mse_dpp},
                      {"mse_gap", r.mse_gap},
                      {"var_gap", r.var_gap}}});
  }

  {
    Rng rng = make_rng(5);
    const NegativeCorrelationReport low =
        verify_negative_correlation_bound(3, 10000, rng);
    const NegativeCorrelationReport high =
        verify_negative_correlation_bound(7, 10000, rng);
    lines.push_back({"negative_correlation_cap", low.passed && high.passed,
                     {{"simplex_pairwise_dot_d3", low.simplex_pairwise_dot},
                      {"violations_d3", low.violations},
                      {"falsification_trials_d3", low.falsification_trials},
                      {"simplex_pairwise_dot_d7", high.simplex_pairwise_dot},
                      {"simplex_max_deviation_d7", high.simplex_max_deviation}}});
  }

  {
    Eigen::MatrixXd features(4, 3);
    features << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1.0 / std::sqrt(2.0),
        1.0 / std::sqrt(2.0), 0;
    const OrthogonalityReport r = verify_orthogonality_argmax(features, 2);
    lines.push_back({"orthogonality_argmax", r.passed,
                     {{"max_det", r.max_det},
                      {"maximizer_count", r.maximizer_count},
                      {"orthogonal_family_count", r.orthogonal_family_count},
                      {"amgm_bound_holds", r.amgm_bound_holds}}});
  }

  return lines;
}

int do_theory_check(bool as_json) {
  const std::vector<CheckLine> lines = run_theory_battery();
  bool all = true;
  for (const CheckLine& line : lines) all = all && line.passed;

  if (as_json) {
    nlohmann::json out;
    out["checks"] = nlohmann::json::array();
    for (const CheckLine& line : lines) {
      nlohmann::json entry = line.detail;
      entry["name"] = line.name;
      entry["passed"] = line.passed;
      out["checks"].push_back(entry);
    }
    out["all_passed"] = all;
    std::cout << out.dump(2) << "\n";
  } else {
    for (const CheckLine& line : lines)
      std::printf("[%s] %s\n", line.passed ? "PASS" : "FAIL",
                  line.name.c_str());
    std::printf("%s\n", all ? "all checks passed" : "some checks FAILED");
  }
  return all ? 0 : 3;
}

int do_plot(const std::string& records_path, const std::string& svg_out) {
  const std::vector<dppmc::RunRecord> records =
      dppmc::load_run_records(records_path);
  if (records.empty()) throw dppmc::ConfigError("plot: no records in file");
  dppmc::save_curves(svg_out, dppmc::summarize_records(records));
  std::cout << "wrote " << svg_out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured Monte Carlo experiment driver"};
  app.require_subcommand(1);

  std::string config_path, run_out, seeds_csv;
  int jobs = 1;
  CLI::App* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--out", run_out, "output directory override");
  run->add_option("--seeds", seeds_csv, "comma-separated seed override");
  run->add_option("--jobs", jobs, "worker threads");

  bool as_json = false;
  CLI::App* theory =
      app.add_subcommand("theory-check", "run the verification battery");
  theory->add_flag("--json", as_json, "emit a JSON report");

  std::string records_path, svg_out;
  CLI::App* plot = app.add_subcommand("plot", "render records to SVG curves");
  plot->add_option("records", records_path, "records.csv path")->required();
  plot->add_option("--out", svg_out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return do_run(config_path, run_out, seeds_csv, jobs);
    if (theory->parsed()) return do_theory_check(as_json);
    return do_plot(records_path, svg_out);
  } catch (const dppmc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
