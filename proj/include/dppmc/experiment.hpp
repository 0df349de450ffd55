#pragma once
// Experiment driver: fans a validated config out over (seed, method) tasks,
// runs them on a small thread pool, and reduces the records into summary
// tables. Task outputs land in preallocated slots, so the reduction order is
// (method, seed) no matter how many workers ran.

#include <Eigen/Dense>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dppmc/benchmarks.hpp"
#include "dppmc/cma_es.hpp"
#include "dppmc/config.hpp"
#include "dppmc/dpp.hpp"
#include "dppmc/dppmc.hpp"
#include "dppmc/es_opt.hpp"
#include "dppmc/kernels.hpp"
#include "dppmc/run_record.hpp"
#include "dppmc/theory_checks.hpp"

namespace dppmc {

struct SummaryRow {
  std::string method;
  long iteration = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  int seeds = 0;
};

struct AblationRow {
  std::string function;
  double rho = 0.0;
  double mean_final = 0.0;
};

// Long-format named metric emitted by theory-check runs.
struct TheoryMetricRow {
  std::string check;
  std::string metric;
  std::uint64_t seed = 0;
  double value = 0.0;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<AblationRow> ablation;
  std::vector<TheoryMetricRow> theory;
  std::vector<std::string> failures;
  std::string digest;
};

// Lower median: the element at index (n-1)/2 of the sorted sample.
inline double lower_median(std::vector<double> v) {
  if (v.empty()) throw Error("lower_median: empty sample");
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

// Nearest-rank quantile: the element at 1-indexed rank ceil(q*n).
inline double nearest_rank(std::vector<double> v, double q) {
  if (v.empty()) throw Error("nearest_rank: empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw Error("nearest_rank: q must be in (0,1]");
  std::sort(v.begin(), v.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

// Per-(method, iteration) quantiles across seeds, ordered by method name
// then iteration.
inline std::vector<SummaryRow> summarize_records(
    const std::vector<RunRecord>& records) {
  std::map<std::string, std::map<long, std::vector<double>>> grouped;
  for (const RunRecord& r : records)
    grouped[r.method][r.iteration].push_back(r.objective);
  std::vector<SummaryRow> summary;
  for (const auto& [method, by_iter] : grouped)
    for (const auto& [iteration, values] : by_iter) {
      SummaryRow row;
      row.method = method;
      row.iteration = iteration;
      row.median = lower_median(values);
      row.q1 = nearest_rank(values, 0.25);
      row.q3 = nearest_rank(values, 0.75);
      row.seeds = static_cast<int>(values.size());
      summary.push_back(row);
    }
  return summary;
}

namespace detail {

struct TaskOutput {
  std::vector<RunRecord> records;
  std::vector<TheoryMetricRow> theory;
  std::string error;  // empty on success
};

inline std::uint64_t fnv1a_string(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline Blackbox make_objective(const FunctionBlock& fb, std::uint64_t seed) {
  Blackbox f = benchmark_function(fb.name, fb.dim);
  if (fb.noise_std > 0.0) f.set_noise_std(fb.noise_std, seed * 31 + 7);
  if (fb.noise_relative > 0.0)
    f.set_relative_noise(fb.noise_relative, seed * 31 + 7);
  return f;
}

inline std::optional<DppmcConfig> dppmc_config_for(const ExperimentConfig& cfg,
                                                   int subset) {
  if (!cfg.dppmc.enabled) return std::nullopt;
  DppmcConfig c;
  c.m = subset;
  c.rho = cfg.dppmc.rho;
  c.sigma = cfg.dppmc.sigma;
  c.renormalize = cfg.dppmc.renormalize;
  return c;
}

inline TaskOutput run_guided_task(const ExperimentConfig& cfg,
                                  std::uint64_t seed, bool diversified) {
  TaskOutput out;
  Rng rng = make_rng(seed);
  Blackbox f = make_objective(cfg.function, seed);
  GuidedEsState s;
  s.theta = cfg.function.start * Eigen::VectorXd::Ones(cfg.function.dim);
  s.sigma = cfg.optimizer.sigma;
  s.step = cfg.optimizer.step;
  s.alpha = cfg.optimizer.alpha;
  s.buffer_capacity = cfg.optimizer.buffer;
  const std::optional<DppmcConfig> dcfg =
      diversified ? dppmc_config_for(cfg, cfg.optimizer.m) : std::nullopt;
  for (long t = 0; t < cfg.budget; ++t) {
    RunRecord r = guided_es_step(s, f, cfg.optimizer.m, dcfg, rng);
    r.seed = seed;
    r.method = diversified ? "dppmc" : "baseline";
    out.records.push_back(std::move(r));
  }
  return out;
}

inline TaskOutput run_trust_region_task(const ExperimentConfig& cfg,
                                        std::uint64_t seed, bool diversified) {
  TaskOutput out;
  Rng rng = make_rng(seed);
  Blackbox f = make_objective(cfg.function, seed);
  TrustRegionState s;
  s.theta = cfg.function.start * Eigen::VectorXd::Ones(cfg.function.dim);
  s.sigma = cfg.optimizer.sigma;
  s.step = cfg.optimizer.step;
  s.delta = cfg.optimizer.delta;
  s.ridge_lambda = cfg.optimizer.ridge_lambda;
  s.use_ridge = cfg.optimizer.use_ridge;
  s.dppmc_sigma = cfg.dppmc.sigma;
  // budget counts objective evaluations for the reuse strategy
  while (f.evaluations() < cfg.budget) {
    TrustRegionStepInfo info =
        trust_region_es_step(s, f, cfg.optimizer.m, diversified, rng);
    info.record.seed = seed;
    info.record.method = diversified ? "dppmc" : "baseline";
    out.records.push_back(std::move(info.record));
  }
  return out;
}

inline TaskOutput run_cmaes_task(const ExperimentConfig& cfg,
                                 std::uint64_t seed, bool diversified) {
  TaskOutput out;
  Rng rng = make_rng(seed);
  Blackbox f = make_objective(cfg.function, seed);
  CmaState s = make_cma_state(
      cfg.function.start * Eigen::VectorXd::Ones(cfg.function.dim),
      cfg.optimizer.sigma0, cfg.optimizer.lambda);
  const std::optional<DppmcConfig> dcfg =
      diversified ? dppmc_config_for(cfg, cfg.optimizer.lambda) : std::nullopt;
  for (long t = 0; t < cfg.budget; ++t) {
    RunRecord r = cma_es_step(s, f, dcfg, rng);
    r.seed = seed;
    r.method = diversified ? "dppmc" : "baseline";
    out.records.push_back(std::move(r));
  }
  return out;
}

// Deterministic mixture for the MSE sweep: component means and variances are
// a pure function of the mixture seed, shared by every task.
inline GaussianMixtureKernel make_sweep_kernel(const KernelMseBlock& kb) {
  Rng rng = make_rng(kb.mixture_seed, 0x6d697874ULL);
  const int q = kb.components;
  Eigen::MatrixXd means(q, kb.dim), variances(q, kb.dim);
  Eigen::VectorXd weights(q);
  for (int c = 0; c < q; ++c) {
    for (int j = 0; j < kb.dim; ++j) {
      means(c, j) = gaussian(rng);
      variances(c, j) = 0.5 + uniform_open(rng);
    }
    weights[c] = 0.5 + uniform_open(rng);
  }
  weights /= weights.sum();
  return GaussianMixtureKernel(
      GaussianMixture(std::move(means), std::move(variances),
                      std::move(weights)));
}

inline TaskOutput run_kernel_mse_task(const ExperimentConfig& cfg,
                                      std::uint64_t seed,
                                      const std::string& method) {
  TaskOutput out;
  const KernelMseBlock& kb = cfg.kernel_mse;
  const GaussianMixtureKernel kern = make_sweep_kernel(kb);
  Rng data_rng = make_rng(kb.mixture_seed, 0x64617461ULL);
  const Eigen::MatrixXd data =
      synthetic_blobs(kb.dim, kb.points, kb.blobs, data_rng);
  const auto pairs = make_pairs(data, kb.pairs, data_rng);
  Rng rng = make_rng(seed, fnv1a_string(method));
  DppmcConfig dcfg;
  dcfg.rho = cfg.dppmc.rho;
  dcfg.sigma = cfg.dppmc.sigma;
  dcfg.renormalize = cfg.dppmc.renormalize;
  long iteration = 0;
  for (double ratio : kb.ratios) {
    const int m = static_cast<int>(std::lround(ratio * kb.dim));
    const MseRow row = empirical_mse(kern, pairs, m,
                                     static_cast<int>(cfg.budget), method,
                                     rng, dcfg);
    RunRecord r;
    r.iteration = iteration++;
    r.cumulative_evals = m;
    r.objective = row.mse;
    r.seed = seed;
    r.method = method;
    out.records.push_back(std::move(r));
  }
  return out;
}

inline TaskOutput run_theory_task(const ExperimentConfig& cfg,
                                  std::uint64_t seed) {
  TaskOutput out;
  DownsampledEstimatorSpec spec;
  const int n = static_cast<int>(cfg.theory.values.size());
  spec.values = Eigen::MatrixXd(n, 1);
  for (int i = 0; i < n; ++i) spec.values(i, 0) = cfg.theory.values[i];
  spec.probabilities =
      Eigen::VectorXd::Constant(n, cfg.theory.probability);
  Rng rng = make_rng(seed, 0x7468656fULL);
  const Theorem1Report rep =
      verify_theorem_1(spec, static_cast<int>(cfg.budget), rng);
  const auto push = [&](const char* metric, double value) {
    out.theory.push_back({"theorem_1", metric, seed, value});
  };
  push("var_iid", rep.var_iid);
  push("var_dpp", rep.var_dpp_closed_form);
  push("var_dpp_empirical", rep.var_dpp_empirical);
  push("mean_iid", rep.mean_iid[0]);
  push("mean_dpp", rep.mean_dpp[0]);
  push("epsilon", rep.epsilon);
  push("passed", rep.passed ? 1.0 : 0.0);
  RunRecord r;
  r.iteration = 0;
  r.cumulative_evals = cfg.budget;
  r.objective = rep.passed ? 1.0 : 0.0;
  r.seed = seed;
  r.method = "theorem_1";
  out.records.push_back(std::move(r));
  return out;
}

inline TaskOutput run_dpp_sample_task(const ExperimentConfig& cfg,
                                      std::uint64_t seed,
                                      const std::string& method) {
  TaskOutput out;
  const DppSampleBlock& db = cfg.dpp_sample;
  Rng kernel_rng = make_rng(db.kernel_seed, 0x6c656e73ULL);
  Eigen::MatrixXd v(db.size, db.rank);
  for (int i = 0; i < db.size; ++i)
    for (int j = 0; j < db.rank; ++j) v(i, j) = gaussian(kernel_rng);
  const LEnsemble ens(v * v.transpose() /
                      static_cast<double>(std::max(db.rank, 1)));
  Rng rng = make_rng(seed, fnv1a_string(method));
  for (long t = 0; t < cfg.budget; ++t) {
    std::vector<int> subset;
    if (method == "kdpp")
      subset = sample_k_dpp(ens, db.subset, rng);
    else
      subset = sample_lensemble(ens, rng);
    RunRecord r;
    r.iteration = t;
    r.cumulative_evals = t + 1;
    r.objective = static_cast<double>(subset.size());
    r.seed = seed;
    r.method = method;
    out.records.push_back(std::move(r));
  }
  return out;
}

inline TaskOutput run_rho_task(const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::string& function, double rho) {
  TaskOutput out;
  const RhoBlock& rb = cfg.rho;
  Rng rng = make_rng(seed);
  Blackbox f = benchmark_function(function, rb.dim);
  CmaState s = make_cma_state(rb.start * Eigen::VectorXd::Ones(rb.dim),
                              rb.sigma0, rb.lambda);
  // A rho whose pool would not exceed lambda selects everything, which is a
  // plain run; skip the selector entirely so the draws coincide bitwise.
  std::optional<DppmcConfig> dcfg;
  if (std::ceil(rho * rb.lambda) > static_cast<double>(rb.lambda)) {
    DppmcConfig c;
    c.m = rb.lambda;
    c.rho = rho;
    c.sigma = rb.rbf_sigma;
    c.renormalize = rb.renormalize;
    dcfg = c;
  }
  char label[64];
  std::snprintf(label, sizeof(label), "%s:rho=%g", function.c_str(), rho);
  for (long t = 0; t < cfg.budget; ++t) {
    RunRecord r = cma_es_step(s, f, dcfg, rng);
    r.seed = seed;
    r.method = label;
    out.records.push_back(std::move(r));
  }
  return out;
}

struct TaskSpec {
  std::uint64_t seed = 0;
  std::string method;
  std::string function;  // rho-ablation only
  double rho = 0.0;      // rho-ablation only
};

inline TaskOutput run_task(const ExperimentConfig& cfg, const TaskSpec& spec) {
  TaskOutput out;
  try {
    if (cfg.kind == "guided-es")
      out = run_guided_task(cfg, spec.seed, spec.method == "dppmc");
    else if (cfg.kind == "trust-region-es")
      out = run_trust_region_task(cfg, spec.seed, spec.method == "dppmc");
    else if (cfg.kind == "cmaes")
      out = run_cmaes_task(cfg, spec.seed, spec.method == "dppmc");
    else if (cfg.kind == "kernel-mse")
      out = run_kernel_mse_task(cfg, spec.seed, spec.method);
    else if (cfg.kind == "theory-check")
      out = run_theory_task(cfg, spec.seed);
    else if (cfg.kind == "dpp-sample")
      out = run_dpp_sample_task(cfg, spec.seed, spec.method);
    else if (cfg.kind == "rho-ablation")
      out = run_rho_task(cfg, spec.seed, spec.function, spec.rho);
    else
      throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
  } catch (const std::exception& e) {
    out.error = "seed=" + std::to_string(spec.seed) + " method=" +
                spec.method + ": " + e.what();
  }
  return out;
}

inline std::vector<TaskSpec> plan_tasks(const ExperimentConfig& cfg) {
  std::vector<TaskSpec> tasks;
  std::vector<std::string> methods;
  if (cfg.kind == "guided-es" || cfg.kind == "trust-region-es" ||
      cfg.kind == "cmaes") {
    methods.push_back("baseline");
    if (cfg.dppmc.enabled) methods.push_back("dppmc");
  } else if (cfg.kind == "kernel-mse") {
    methods = cfg.kernel_mse.methods;
    if (methods.empty()) throw ConfigError("kernel-mse: empty method list");
  } else if (cfg.kind == "theory-check") {
    methods.push_back("theorem_1");
  } else if (cfg.kind == "dpp-sample") {
    methods.push_back("dpp");
    if (cfg.dpp_sample.subset > 0) methods.push_back("kdpp");
  } else if (cfg.kind == "rho-ablation") {
    for (const std::string& fn : cfg.rho.functions)
      for (double rho : cfg.rho.rho_list) {
        char label[64];
        std::snprintf(label, sizeof(label), "%s:rho=%g", fn.c_str(), rho);
        TaskSpec t;
        t.method = label;
        t.function = fn;
        t.rho = rho;
        tasks.push_back(t);
      }
  }
  if (cfg.kind == "rho-ablation") {
    std::vector<TaskSpec> expanded;
    for (const TaskSpec& t : tasks)
      for (std::uint64_t seed : cfg.seeds) {
        TaskSpec copy = t;
        copy.seed = seed;
        expanded.push_back(copy);
      }
    return expanded;
  }
  for (const std::string& method : methods)
    for (std::uint64_t seed : cfg.seeds) {
      TaskSpec t;
      t.seed = seed;
      t.method = method;
      tasks.push_back(t);
    }
  return tasks;
}

}  // namespace detail

// Environment override: DPPMC_SEED replaces the config seed list with a
// comma-separated list of its own.
inline void apply_seed_override(ExperimentConfig* cfg) {
  const char* env = std::getenv("DPPMC_SEED");
  if (!env || !*env) return;
  std::vector<std::uint64_t> seeds;
  std::string token;
  std::istringstream in(env);
  while (std::getline(in, token, ',')) {
    token = detail::config_trim(token);
    if (token.empty()) continue;
    try {
      seeds.push_back(std::stoull(token));
    } catch (const std::exception&) {
      throw ConfigError("DPPMC_SEED: invalid seed '" + token + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("DPPMC_SEED: no seeds given");
  cfg->seeds = std::move(seeds);
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       int jobs = 1) {
  ExperimentResult result;
  result.digest = cfg.digest;
  if (cfg.budget == 0) return result;  // degenerate: nothing to run
  const std::vector<detail::TaskSpec> tasks = detail::plan_tasks(cfg);
  std::vector<detail::TaskOutput> slots(tasks.size());

  const int workers = std::max(
      1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      slots[i] = detail::run_task(cfg, tasks[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          slots[i] = detail::run_task(cfg, tasks[i]);
        }
      });
    for (std::thread& t : pool) t.join();
  }

  for (detail::TaskOutput& slot : slots) {
    if (!slot.error.empty()) result.failures.push_back(slot.error);
    for (RunRecord& r : slot.records) result.records.push_back(std::move(r));
    for (TheoryMetricRow& r : slot.theory)
      result.theory.push_back(std::move(r));
  }

  result.summary = summarize_records(result.records);

  if (cfg.kind == "rho-ablation") {
    // final best-so-far per task, averaged across seeds
    std::map<std::pair<std::string, std::uint64_t>, double> running;
    for (const RunRecord& r : result.records) {
      const auto key = std::make_pair(r.method, r.seed);
      const auto it = running.find(key);
      if (it == running.end())
        running[key] = r.objective;
      else
        it->second = std::min(it->second, r.objective);
    }
    for (const std::string& fn : cfg.rho.functions)
      for (double rho : cfg.rho.rho_list) {
        char label[64];
        std::snprintf(label, sizeof(label), "%s:rho=%g", fn.c_str(), rho);
        std::vector<double> vals;
        for (std::uint64_t seed : cfg.seeds) {
          const auto it = running.find({label, seed});
          if (it != running.end()) vals.push_back(it->second);
        }
        if (vals.empty()) continue;
        AblationRow row;
        row.function = fn;
        row.rho = rho;
        row.mean_final = 0.0;
        for (double v : vals) row.mean_final += v;
        row.mean_final /= static_cast<double>(vals.size());
        result.ablation.push_back(row);
      }
  }
  return result;
}

// Writes records.csv, summary.csv and any kind-specific tables into the
// output directory. Paths are always joined onto output_dir, never absolute.
inline void write_experiment_outputs(const ExperimentResult& result,
                                     const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  const std::string comment = "digest=" + result.digest + " kind=" + cfg.kind;

  save_run_records((dir / "records.csv").string(), result.records, comment);

  {
    std::ofstream out(dir / "summary.csv");
    if (!out) throw Error("write_experiment_outputs: cannot open summary.csv");
    out << "# " << comment << "\n";
    out << "method,iteration,median,q1,q3,seeds\n";
    for (const SummaryRow& r : result.summary)
      out << r.method << ',' << r.iteration << ','
          << detail::format_double(r.median) << ','
          << detail::format_double(r.q1) << ',' << detail::format_double(r.q3)
          << ',' << r.seeds << "\n";
  }

  if (!result.ablation.empty()) {
    std::ofstream out(dir / "ablation.csv");
    if (!out)
      throw Error("write_experiment_outputs: cannot open ablation.csv");
    out << "# " << comment << "\n";
    out << "function,rho,mean_final\n";
    for (const AblationRow& r : result.ablation)
      out << r.function << ',' << detail::format_double(r.rho) << ','
          << detail::format_double(r.mean_final) << "\n";
  }

  if (!result.theory.empty()) {
    std::ofstream out(dir / "theory.csv");
    if (!out) throw Error("write_experiment_outputs: cannot open theory.csv");
    out << "# " << comment << "\n";
    out << "check,metric,seed,value\n";
    for (const TheoryMetricRow& r : result.theory)
      out << r.check << ',' << r.metric << ',' << r.seed << ','
          << detail::format_double(r.value) << "\n";
  }

  if (!result.failures.empty()) {
    std::ofstream out(dir / "failures.txt");
    for (const std::string& f : result.failures) out << f << "\n";
  }
}

}  // namespace dppmc
