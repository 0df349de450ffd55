#pragma once
// Strict experiment configuration: a small section/key-value file format with
// a fixed per-kind schema. Unknown sections or keys are fatal with line
// diagnostics, because a silently ignored hyperparameter invalidates any
// benchmark comparison downstream.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dppmc/common.hpp"

namespace dppmc {

struct ConfigValue {
  enum Kind { kNumber, kBool, kString, kNumberList, kStringList };
  Kind kind = kNumber;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<double> numbers;
  std::vector<std::string> texts;
  int line = 0;
};

// Parsed file before schema interpretation: section -> key -> value.
struct RawConfig {
  std::map<std::string, std::map<std::string, ConfigValue>> sections;
};

namespace detail {

inline std::string config_trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_number_token(const std::string& token, double* out) {
  if (token.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) return false;
  *out = v;
  return true;
}

inline ConfigValue parse_value_token(const std::string& token, int line) {
  ConfigValue v;
  v.line = line;
  if (token.size() >= 2 && token.front() == '"' && token.back() == '"') {
    v.kind = ConfigValue::kString;
    v.text = token.substr(1, token.size() - 2);
    return v;
  }
  if (token == "true" || token == "false") {
    v.kind = ConfigValue::kBool;
    v.boolean = token == "true";
    return v;
  }
  if (parse_number_token(token, &v.number)) {
    v.kind = ConfigValue::kNumber;
    return v;
  }
  throw ConfigError("config line " + std::to_string(line) +
                    ": unparseable value '" + token + "'");
}

}  // namespace detail

inline RawConfig parse_config_text(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // strip a comment that is not inside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string body = detail::config_trim(line);
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      section = detail::config_trim(body.substr(1, body.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty section name");
      raw.sections[section];
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = detail::config_trim(body.substr(0, eq));
    const std::string rest = detail::config_trim(body.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": key '" + key + "' outside any [section]");
    if (raw.sections[section].count(key))
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + section + "." + key + "'");

    ConfigValue value;
    if (!rest.empty() && rest.front() == '[') {
      if (rest.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated list");
      value.line = line_no;
      const std::string inner = rest.substr(1, rest.size() - 2);
      std::vector<std::string> items;
      std::string cur;
      bool q = false;
      for (char c : inner) {
        if (c == '"') q = !q;
        if (c == ',' && !q) {
          items.push_back(detail::config_trim(cur));
          cur.clear();
        } else {
          cur += c;
        }
      }
      if (!detail::config_trim(cur).empty() || q)
        items.push_back(detail::config_trim(cur));
      bool any_string = false, any_number = false;
      for (const std::string& item : items) {
        const ConfigValue parsed = detail::parse_value_token(item, line_no);
        if (parsed.kind == ConfigValue::kString) {
          any_string = true;
          value.texts.push_back(parsed.text);
        } else if (parsed.kind == ConfigValue::kNumber) {
          any_number = true;
          value.numbers.push_back(parsed.number);
        } else {
          throw ConfigError("config line " + std::to_string(line_no) +
                            ": lists hold numbers or strings");
        }
      }
      if (any_string && any_number)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": mixed list types");
      value.kind = any_string ? ConfigValue::kStringList
                              : ConfigValue::kNumberList;
    } else {
      value = detail::parse_value_token(rest, line_no);
    }
    raw.sections[section][key] = value;
  }
  return raw;
}

inline RawConfig load_raw_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

namespace detail {

inline std::string format_config_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_config_value(const ConfigValue& v) {
  switch (v.kind) {
    case ConfigValue::kNumber:
      return format_config_number(v.number);
    case ConfigValue::kBool:
      return v.boolean ? "true" : "false";
    case ConfigValue::kString:
      return v.text;
    case ConfigValue::kNumberList: {
      std::string out;
      for (double d : v.numbers) {
        if (!out.empty()) out += ",";
        out += format_config_number(d);
      }
      return out;
    }
    case ConfigValue::kStringList: {
      std::string out;
      for (const std::string& s : v.texts) {
        if (!out.empty()) out += ",";
        out += s;
      }
      return out;
    }
  }
  return {};
}

}  // namespace detail

// Canonical one-line-per-key rendering with sorted sections and keys; the
// digest is FNV-1a over this text, so formatting equals identity.
inline std::string canonical_config(const RawConfig& raw) {
  std::string out;
  for (const auto& [section, keys] : raw.sections)
    for (const auto& [key, value] : keys)
      out += section + "." + key + "=" + detail::format_config_value(value) +
             "\n";
  return out;
}

inline std::string config_digest(const RawConfig& raw) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical_config(raw)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Typed view. Every kind shares the [experiment] block; the rest of the
// schema depends on the kind, and any key outside it is fatal.

struct FunctionBlock {
  std::string name = "sphere";
  int dim = 2;
  double start = 1.0;
  double noise_std = 0.0;
  double noise_relative = 0.0;
};

struct OptimizerBlock {
  int m = 16;                  // guided / trust-region population
  int lambda = 16;             // cmaes population
  double sigma = 0.1;          // perturbation scale (guided / trust-region)
  double sigma0 = 0.5;         // cmaes initial step size
  double step = 0.1;
  double alpha = 0.5;
  int buffer = 1;
  double delta = 0.2;
  double ridge_lambda = 1e-3;
  bool use_ridge = true;
};

struct DppmcBlock {
  bool enabled = false;
  double rho = 10.0;
  double sigma = 0.5;
  bool renormalize = false;
};

struct KernelMseBlock {
  int dim = 8;
  int components = 3;
  std::uint64_t mixture_seed = 1;
  int points = 500;
  int pairs = 500;
  int blobs = 4;
  std::vector<double> ratios = {1.0, 2.0, 3.0};
  std::vector<std::string> methods = {"iid", "qmc", "dppmc"};
};

struct TheoryBlock {
  std::vector<double> values = {1.0, 1.0, 1.0, 1.0};
  double probability = 0.5;
};

struct DppSampleBlock {
  int size = 6;
  int rank = 6;
  int subset = 0;  // 0 runs only the marginal sampler
  std::uint64_t kernel_seed = 1;
};

struct RhoBlock {
  std::vector<std::string> functions = {"cigar", "sphere", "rosenbrock",
                                        "rastrigin"};
  int dim = 16;
  int lambda = 16;
  double sigma0 = 0.5;
  double start = 2.0;
  std::vector<double> rho_list = {2.0, 5.0, 10.0, 20.0};
  double rbf_sigma = 0.5;
  bool renormalize = false;
};

struct ExperimentConfig {
  std::string kind;
  std::vector<std::uint64_t> seeds;
  long budget = 0;
  std::string output_dir = "out";
  FunctionBlock function;
  OptimizerBlock optimizer;
  DppmcBlock dppmc;
  KernelMseBlock kernel_mse;
  TheoryBlock theory;
  DppSampleBlock dpp_sample;
  RhoBlock rho;
  std::string digest;
};

namespace detail {

inline const ConfigValue* config_find(const RawConfig& raw,
                                      const std::string& section,
                                      const std::string& key) {
  const auto s = raw.sections.find(section);
  if (s == raw.sections.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

inline double config_number(const ConfigValue& v, const std::string& what) {
  if (v.kind != ConfigValue::kNumber)
    throw ConfigError("config line " + std::to_string(v.line) + ": " + what +
                      " must be a number");
  return v.number;
}

inline long config_integer(const ConfigValue& v, const std::string& what) {
  const double d = config_number(v, what);
  const long l = static_cast<long>(d);
  if (static_cast<double>(l) != d)
    throw ConfigError("config line " + std::to_string(v.line) + ": " + what +
                      " must be an integer");
  return l;
}

inline bool config_bool(const ConfigValue& v, const std::string& what) {
  if (v.kind != ConfigValue::kBool)
    throw ConfigError("config line " + std::to_string(v.line) + ": " + what +
                      " must be true or false");
  return v.boolean;
}

inline std::string config_string(const ConfigValue& v,
                                 const std::string& what) {
  if (v.kind != ConfigValue::kString)
    throw ConfigError("config line " + std::to_string(v.line) + ": " + what +
                      " must be a quoted string");
  return v.text;
}

inline std::vector<double> config_number_list(const ConfigValue& v,
                                              const std::string& what) {
  if (v.kind != ConfigValue::kNumberList)
    throw ConfigError("config line " + std::to_string(v.line) + ": " + what +
                      " must be a list of numbers");
  return v.numbers;
}

inline std::vector<std::string> config_string_list(const ConfigValue& v,
                                                   const std::string& what) {
  if (v.kind != ConfigValue::kStringList)
    throw ConfigError("config line " + std::to_string(v.line) + ": " + what +
                      " must be a list of strings");
  return v.texts;
}

inline std::set<std::string> allowed_keys_for(const std::string& kind) {
  std::set<std::string> allowed = {"experiment.kind", "experiment.seeds",
                                   "experiment.budget",
                                   "experiment.output_dir"};
  const auto add = [&](const std::string& entry) { allowed.insert(entry); };
  if (kind == "guided-es" || kind == "trust-region-es" || kind == "cmaes") {
    for (const char* k :
         {"function.name", "function.dim", "function.start",
          "function.noise_std", "function.noise_relative"})
      add(k);
    add("dppmc.enabled");
    add("dppmc.sigma");
    if (kind != "trust-region-es") {
      add("dppmc.rho");
      add("dppmc.renormalize");
    }
    if (kind == "guided-es")
      for (const char* k : {"optimizer.m", "optimizer.sigma", "optimizer.step",
                            "optimizer.alpha", "optimizer.buffer"})
        add(k);
    if (kind == "trust-region-es")
      for (const char* k :
           {"optimizer.m", "optimizer.sigma", "optimizer.step",
            "optimizer.delta", "optimizer.ridge_lambda", "optimizer.use_ridge"})
        add(k);
    if (kind == "cmaes")
      for (const char* k : {"optimizer.lambda", "optimizer.sigma0"}) add(k);
  } else if (kind == "kernel-mse") {
    for (const char* k :
         {"kernel-mse.dim", "kernel-mse.components", "kernel-mse.mixture_seed",
          "kernel-mse.points", "kernel-mse.pairs", "kernel-mse.blobs",
          "kernel-mse.ratios", "kernel-mse.methods", "dppmc.rho",
          "dppmc.sigma", "dppmc.renormalize"})
      add(k);
  } else if (kind == "theory-check") {
    for (const char* k : {"theory-check.values", "theory-check.probability"})
      add(k);
  } else if (kind == "dpp-sample") {
    for (const char* k : {"dpp-sample.size", "dpp-sample.rank",
                          "dpp-sample.subset", "dpp-sample.kernel_seed"})
      add(k);
  } else if (kind == "rho-ablation") {
    for (const char* k :
         {"rho-ablation.functions", "rho-ablation.dim", "rho-ablation.lambda",
          "rho-ablation.sigma0", "rho-ablation.start", "rho-ablation.rho_list",
          "rho-ablation.rbf_sigma", "rho-ablation.renormalize"})
      add(k);
  } else {
    throw ConfigError("unknown experiment kind '" + kind + "'");
  }
  return allowed;
}

}  // namespace detail

inline ExperimentConfig interpret_config(const RawConfig& raw) {
  using detail::config_find;
  ExperimentConfig cfg;

  const ConfigValue* kind = config_find(raw, "experiment", "kind");
  if (!kind) throw ConfigError("missing required key experiment.kind");
  cfg.kind = detail::config_string(*kind, "experiment.kind");

  const std::set<std::string> allowed = detail::allowed_keys_for(cfg.kind);
  for (const auto& [section, keys] : raw.sections)
    for (const auto& [key, value] : keys) {
      const std::string full = section + "." + key;
      if (!allowed.count(full))
        throw ConfigError("config line " + std::to_string(value.line) +
                          ": unknown key '" + full + "' for kind '" +
                          cfg.kind + "'");
    }

  const ConfigValue* seeds = config_find(raw, "experiment", "seeds");
  if (!seeds) throw ConfigError("missing required key experiment.seeds");
  for (double s : detail::config_number_list(*seeds, "experiment.seeds")) {
    if (s < 0 || s != std::floor(s))
      throw ConfigError("config line " + std::to_string(seeds->line) +
                        ": seeds must be nonnegative integers");
    cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (cfg.seeds.empty())
    throw ConfigError("config line " + std::to_string(seeds->line) +
                      ": seeds must be nonempty");
  std::vector<std::uint64_t> sorted_seeds = cfg.seeds;
  std::sort(sorted_seeds.begin(), sorted_seeds.end());
  if (std::adjacent_find(sorted_seeds.begin(), sorted_seeds.end()) !=
      sorted_seeds.end())
    throw ConfigError("config line " + std::to_string(seeds->line) +
                      ": seeds must be distinct");

  const ConfigValue* budget = config_find(raw, "experiment", "budget");
  if (!budget) throw ConfigError("missing required key experiment.budget");
  cfg.budget = detail::config_integer(*budget, "experiment.budget");
  if (cfg.budget < 0)
    throw ConfigError("config line " + std::to_string(budget->line) +
                      ": budget must be nonnegative");

  if (const ConfigValue* out = config_find(raw, "experiment", "output_dir"))
    cfg.output_dir = detail::config_string(*out, "experiment.output_dir");

  const auto num = [&](const char* sec, const char* key, double* target) {
    if (const ConfigValue* v = config_find(raw, sec, key))
      *target = detail::config_number(*v, std::string(sec) + "." + key);
  };
  const auto integer = [&](const char* sec, const char* key, int* target) {
    if (const ConfigValue* v = config_find(raw, sec, key))
      *target = static_cast<int>(
          detail::config_integer(*v, std::string(sec) + "." + key));
  };
  const auto unsigned64 = [&](const char* sec, const char* key,
                              std::uint64_t* target) {
    if (const ConfigValue* v = config_find(raw, sec, key)) {
      const long l = detail::config_integer(*v, std::string(sec) + "." + key);
      if (l < 0)
        throw ConfigError("config line " + std::to_string(v->line) + ": " +
                          sec + "." + key + " must be nonnegative");
      *target = static_cast<std::uint64_t>(l);
    }
  };
  const auto flag = [&](const char* sec, const char* key, bool* target) {
    if (const ConfigValue* v = config_find(raw, sec, key))
      *target = detail::config_bool(*v, std::string(sec) + "." + key);
  };
  const auto str = [&](const char* sec, const char* key, std::string* target) {
    if (const ConfigValue* v = config_find(raw, sec, key))
      *target = detail::config_string(*v, std::string(sec) + "." + key);
  };

  str("function", "name", &cfg.function.name);
  integer("function", "dim", &cfg.function.dim);
  num("function", "start", &cfg.function.start);
  num("function", "noise_std", &cfg.function.noise_std);
  num("function", "noise_relative", &cfg.function.noise_relative);

  integer("optimizer", "m", &cfg.optimizer.m);
  integer("optimizer", "lambda", &cfg.optimizer.lambda);
  num("optimizer", "sigma", &cfg.optimizer.sigma);
  num("optimizer", "sigma0", &cfg.optimizer.sigma0);
  num("optimizer", "step", &cfg.optimizer.step);
  num("optimizer", "alpha", &cfg.optimizer.alpha);
  integer("optimizer", "buffer", &cfg.optimizer.buffer);
  num("optimizer", "delta", &cfg.optimizer.delta);
  num("optimizer", "ridge_lambda", &cfg.optimizer.ridge_lambda);
  flag("optimizer", "use_ridge", &cfg.optimizer.use_ridge);

  flag("dppmc", "enabled", &cfg.dppmc.enabled);
  num("dppmc", "rho", &cfg.dppmc.rho);
  num("dppmc", "sigma", &cfg.dppmc.sigma);
  flag("dppmc", "renormalize", &cfg.dppmc.renormalize);

  integer("kernel-mse", "dim", &cfg.kernel_mse.dim);
  integer("kernel-mse", "components", &cfg.kernel_mse.components);
  unsigned64("kernel-mse", "mixture_seed", &cfg.kernel_mse.mixture_seed);
  integer("kernel-mse", "points", &cfg.kernel_mse.points);
  integer("kernel-mse", "pairs", &cfg.kernel_mse.pairs);
  integer("kernel-mse", "blobs", &cfg.kernel_mse.blobs);
  if (const ConfigValue* v = config_find(raw, "kernel-mse", "ratios"))
    cfg.kernel_mse.ratios =
        detail::config_number_list(*v, "kernel-mse.ratios");
  if (const ConfigValue* v = config_find(raw, "kernel-mse", "methods"))
    cfg.kernel_mse.methods =
        detail::config_string_list(*v, "kernel-mse.methods");

  if (const ConfigValue* v = config_find(raw, "theory-check", "values"))
    cfg.theory.values = detail::config_number_list(*v, "theory-check.values");
  num("theory-check", "probability", &cfg.theory.probability);

  integer("dpp-sample", "size", &cfg.dpp_sample.size);
  integer("dpp-sample", "rank", &cfg.dpp_sample.rank);
  integer("dpp-sample", "subset", &cfg.dpp_sample.subset);
  unsigned64("dpp-sample", "kernel_seed", &cfg.dpp_sample.kernel_seed);

  if (const ConfigValue* v = config_find(raw, "rho-ablation", "functions"))
    cfg.rho.functions =
        detail::config_string_list(*v, "rho-ablation.functions");
  integer("rho-ablation", "dim", &cfg.rho.dim);
  integer("rho-ablation", "lambda", &cfg.rho.lambda);
  num("rho-ablation", "sigma0", &cfg.rho.sigma0);
  num("rho-ablation", "start", &cfg.rho.start);
  if (const ConfigValue* v = config_find(raw, "rho-ablation", "rho_list")) {
    cfg.rho.rho_list = detail::config_number_list(*v, "rho-ablation.rho_list");
    std::vector<double> sorted_rho = cfg.rho.rho_list;
    std::sort(sorted_rho.begin(), sorted_rho.end());
    if (std::adjacent_find(sorted_rho.begin(), sorted_rho.end()) !=
        sorted_rho.end())
      throw ConfigError("config line " + std::to_string(v->line) +
                        ": rho_list holds duplicate values");
    if (cfg.rho.rho_list.empty())
      throw ConfigError("config line " + std::to_string(v->line) +
                        ": rho_list must be nonempty");
  }
  num("rho-ablation", "rbf_sigma", &cfg.rho.rbf_sigma);
  flag("rho-ablation", "renormalize", &cfg.rho.renormalize);

  cfg.digest = config_digest(raw);
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  return interpret_config(load_raw_config(path));
}

}  // namespace dppmc
