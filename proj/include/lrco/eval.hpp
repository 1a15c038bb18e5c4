// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//
//  Run configuration, evaluation and the pipeline steps behind the command
//  line tool.
//
//  Output layout under the run directory:
//
//    data/raw_{train,val,test}.csv          x_pred = x_true
//    data/{split}_{linear,residual}.csv     x_pred from each predictor
//    data/budget.csv                        error budget per predictor
//    predictors/{linear,residual}.txt
//    models/<predictor>/{lrco,lco}/         bundles
//    models/<predictor>/curve_{lrco,lco}.csv
//    eval/<predictor>/{summary,per_instance,cdf}.csv
//    bench/<predictor>/bench_time.csv
//    sweep/<predictor>/sweep_<axis>.csv
//

#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lrco/baselines.hpp"
#include "lrco/common.hpp"
#include "lrco/lrco.hpp"
#include "lrco/vec_env.hpp"

namespace lrco::eval {

namespace fs = std::filesystem;

struct DataConfig {
  std::size_t train = 3000;
  std::size_t val = 800;
  std::size_t test = 1200;
  int services = 4;
  int clouds = 5;
  int rounds = 1000;
  double percentile = 99.0;
  int residual_epochs = 60;
};

struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;
  DataConfig data{};
  std::string predictor = "linear";  // which annotated split to train and evaluate on
  double epsilon = 0.0;              // 0: the predictor's error budget
  double p = 2.0;
  LrcoConfig lrco{};
  bool train_lco = true;
  std::vector<PolicyKind> policies{std::begin(kAllPolicies), std::end(kAllPolicies)};
  PgaConfig pga{};
  int bench_runs = 10;
  std::size_t bench_instances = 100;
  std::vector<int> sweep_samples{10, 100, 1000};
  std::vector<int> sweep_hidden{20, 50, 200};
};

inline RunConfig profile_config(std::string_view name) {
  RunConfig c;
  c.profile = std::string(name);
  auto& l = c.lrco;
  l.minimizer.baseline = BaselineSampling::policy;
  if (name == "toy") {
    c.data = {600, 150, 150, 2, 3, 300, 99.0, 30};
    l.max_iterate = 1;
    l.decision_set_size = 64;
    l.context_subsample = 512;
    l.candidates = 100;
    l.minimizer.epochs = 60;
    l.pretrain.epochs = 10;
    l.retrain.epochs = 5;
    c.bench_instances = 50;
    c.sweep_samples = {1, 10, 100};
  } else if (name == "desk") {
    l.minimizer.epochs = 30;
    l.pretrain.epochs = 20;
    l.retrain.epochs = 10;
  } else if (name == "full") {
    c.data = {15000, 4000, 6000, 4, 5, 1000, 99.0, 60};
    l.minimizer.epochs = 100;
    l.pretrain.epochs = 40;
    l.retrain.epochs = 20;
    c.bench_instances = 300;
  } else {
    throw ConfigError("unknown profile '" + std::string(name) + "' (toy, desk, full)");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Configuration files: "[section]" headers and "key = value" lines, '#'
// starts a comment.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<int> parse_ints(std::string_view v) {
  std::vector<int> out;
  for (auto part : split(v, ',')) out.push_back(static_cast<int>(parse_int(trim(part))));
  return out;
}

inline std::vector<double> parse_reals(std::string_view v) {
  std::vector<double> out;
  for (auto part : split(v, ',')) out.push_back(parse_real(trim(part)));
  return out;
}

inline std::size_t parse_size(std::string_view v) {
  const auto n = parse_int(trim(v));
  if (n < 0) throw ConfigError("expected a nonnegative count, got " + std::string(v));
  return static_cast<std::size_t>(n);
}

inline bool parse_bool(std::string_view v) {
  const auto t = trim(v);
  if (t == "true" || t == "1" || t == "on") return true;
  if (t == "false" || t == "0" || t == "off") return false;
  throw ConfigError("expected a boolean, got " + t);
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, auto v) { c.seed = static_cast<std::uint64_t>(parse_int(trim(v))); }},
      {"data.train", [](RunConfig& c, auto v) { c.data.train = parse_size(v); }},
      {"data.val", [](RunConfig& c, auto v) { c.data.val = parse_size(v); }},
      {"data.test", [](RunConfig& c, auto v) { c.data.test = parse_size(v); }},
      {"data.services", [](RunConfig& c, auto v) { c.data.services = static_cast<int>(parse_int(trim(v))); }},
      {"data.clouds", [](RunConfig& c, auto v) { c.data.clouds = static_cast<int>(parse_int(trim(v))); }},
      {"data.rounds", [](RunConfig& c, auto v) { c.data.rounds = static_cast<int>(parse_int(trim(v))); }},
      {"data.percentile", [](RunConfig& c, auto v) { c.data.percentile = parse_real(v); }},
      {"data.residual_epochs",
       [](RunConfig& c, auto v) { c.data.residual_epochs = static_cast<int>(parse_int(trim(v))); }},
      {"data.predictor", [](RunConfig& c, auto v) { c.predictor = trim(v); }},
      {"data.epsilon", [](RunConfig& c, auto v) { c.epsilon = parse_real(v); }},
      {"data.p", [](RunConfig& c, auto v) { c.p = parse_real(v); }},
      {"train.max_iterate", [](RunConfig& c, auto v) { c.lrco.max_iterate = static_cast<int>(parse_int(trim(v))); }},
      {"train.decision_set", [](RunConfig& c, auto v) { c.lrco.decision_set_size = parse_size(v); }},
      {"train.context_subsample", [](RunConfig& c, auto v) { c.lrco.context_subsample = parse_size(v); }},
      {"train.candidates", [](RunConfig& c, auto v) { c.lrco.candidates = static_cast<int>(parse_int(trim(v))); }},
      {"train.lambdas", [](RunConfig& c, auto v) { c.lrco.lambdas = parse_reals(v); }},
      {"train.maximizer_hidden", [](RunConfig& c, auto v) { c.lrco.maximizer_hidden = parse_ints(v); }},
      {"train.minimizer_hidden", [](RunConfig& c, auto v) { c.lrco.minimizer_hidden = parse_ints(v); }},
      {"train.minimizer_epochs",
       [](RunConfig& c, auto v) { c.lrco.minimizer.epochs = static_cast<int>(parse_int(trim(v))); }},
      {"train.minimizer_batch",
       [](RunConfig& c, auto v) { c.lrco.minimizer.batch = static_cast<int>(parse_int(trim(v))); }},
      {"train.baseline_samples",
       [](RunConfig& c, auto v) { c.lrco.minimizer.baseline_samples = static_cast<int>(parse_int(trim(v))); }},
      {"train.minimizer_lr", [](RunConfig& c, auto v) { c.lrco.minimizer.lr = parse_real(v); }},
      {"train.gradient_form",
       [](RunConfig& c, auto v) {
         const auto t = trim(v);
         if (t == "score_function") {
           c.lrco.minimizer.form = PolicyGradientForm::score_function;
         } else if (t == "probability") {
           c.lrco.minimizer.form = PolicyGradientForm::probability;
         } else {
           throw ConfigError("gradient_form must be score_function or probability");
         }
       }},
      {"train.baseline",
       [](RunConfig& c, auto v) {
         const auto t = trim(v);
         if (t == "uniform") {
           c.lrco.minimizer.baseline = BaselineSampling::uniform;
         } else if (t == "policy") {
           c.lrco.minimizer.baseline = BaselineSampling::policy;
         } else {
           throw ConfigError("baseline must be uniform or policy");
         }
       }},
      {"train.pretrain_epochs", [](RunConfig& c, auto v) { c.lrco.pretrain.epochs = static_cast<int>(parse_int(trim(v))); }},
      {"train.retrain_epochs", [](RunConfig& c, auto v) { c.lrco.retrain.epochs = static_cast<int>(parse_int(trim(v))); }},
      {"train.maximizer_lr",
       [](RunConfig& c, auto v) { c.lrco.pretrain.lr = c.lrco.retrain.lr = parse_real(v); }},
      {"train.maximizer_batch",
       [](RunConfig& c, auto v) {
         c.lrco.pretrain.batch = c.lrco.retrain.batch = static_cast<int>(parse_int(trim(v)));
       }},
      {"train.convergence_tol", [](RunConfig& c, auto v) { c.lrco.convergence_tol = parse_real(v); }},
      {"train.lco", [](RunConfig& c, auto v) { c.train_lco = parse_bool(v); }},
      {"eval.policies",
       [](RunConfig& c, auto v) {
         c.policies.clear();
         for (auto part : split(v, ',')) c.policies.push_back(policy_from_string(trim(part)));
       }},
      {"eval.pga_starts", [](RunConfig& c, auto v) { c.pga.starts = static_cast<int>(parse_int(trim(v))); }},
      {"eval.pga_steps", [](RunConfig& c, auto v) { c.pga.steps = static_cast<int>(parse_int(trim(v))); }},
      {"eval.pga_step_scale", [](RunConfig& c, auto v) { c.pga.step_scale = parse_real(v); }},
      {"eval.bench_runs", [](RunConfig& c, auto v) { c.bench_runs = static_cast<int>(parse_int(trim(v))); }},
      {"eval.bench_instances", [](RunConfig& c, auto v) { c.bench_instances = parse_size(v); }},
      {"eval.sweep_samples", [](RunConfig& c, auto v) { c.sweep_samples = parse_ints(v); }},
      {"eval.sweep_hidden", [](RunConfig& c, auto v) { c.sweep_hidden = parse_ints(v); }},
  };
  return table;
}

}  // namespace detail

// Sets "section.key" (or a bare top-level key) from its text value.
inline void apply_setting(RunConfig& cfg, const std::string& key, std::string_view value) {
  const auto& t = detail::setters();
  const auto it = t.find(key);
  if (it == t.end()) throw ConfigError("unknown configuration key '" + key + "'");
  try {
    it->second(cfg, value);
  } catch (const FormatError& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

// The profile named in the file (key "profile", top level) is applied first,
// then every other key overrides it.
inline RunConfig parse_config(std::istream& is, std::optional<std::string> profile = std::nullopt) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
      section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    auto key = detail::trim(std::string_view(t).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    entries.emplace_back(key, detail::trim(std::string_view(t).substr(eq + 1)));
  }
  std::string name = profile.value_or("desk");
  for (const auto& [k, v] : entries)
    if (k == "profile" && !profile) name = v;
  RunConfig cfg = profile_config(name);
  for (const auto& [k, v] : entries)
    if (k != "profile") apply_setting(cfg, k, v);
  return cfg;
}

inline RunConfig load_config(const fs::path& path, std::optional<std::string> profile = std::nullopt) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  return parse_config(is, std::move(profile));
}

inline void validate(const RunConfig& c) {
  if (c.data.train < 1 || c.data.val < 1 || c.data.test < 1)
    throw ConfigError("every dataset split needs at least one instance");
  if (c.data.services < 1 || c.data.clouds < 1) throw ConfigError("services and clouds must be positive");
  if (c.data.rounds < 1) throw ConfigError("rounds must be positive");
  if (c.predictor != "linear" && c.predictor != "residual")
    throw ConfigError("predictor must be linear or residual");
  if (c.epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
  if (c.lrco.candidates < 1) throw ConfigError("candidates must be positive");
  if (c.lrco.lambdas.empty()) throw ConfigError("the ensemble needs at least one member");
  if (c.bench_runs < 1) throw ConfigError("bench_runs must be positive");
}

// ---------------------------------------------------------------------------
// Evaluation.
// ---------------------------------------------------------------------------

struct PolicyModels {
  const LrcoModel* lrco = nullptr;
  const MinimizerPolicy* lco = nullptr;
  int candidates = 1000;
  std::uint64_t seed = 1;
};

inline Decision decide(PolicyKind kind, const vec::ProblemInstance& inst, const PolicyModels& m) {
  switch (kind) {
    case PolicyKind::random: {
      Rng rng = make_rng(m.seed, 0x7a4d, inst.id);
      return random_decision(DecisionSpace::binary(static_cast<int>(inst.dim())), rng);
    }
    case PolicyKind::greedy:
      return greedy_decision(inst.x_pred, inst.eta, inst.services, inst.clouds);
    case PolicyKind::weak_oracle:
      return weak_oracle(inst);
    case PolicyKind::oracle:
      return oracle(inst);
    case PolicyKind::lco:
      if (!m.lco) throw ConfigError("policy lco requested but no LCO bundle is loaded");
      return lco_infer(*m.lco, inst, m.candidates, m.seed).decision;
    case PolicyKind::lrco:
      if (!m.lrco) throw ConfigError("policy lrco requested but no LRCO bundle is loaded");
      return infer(*m.lrco, inst, m.seed, m.candidates).decision;
  }
  throw ConfigError("unknown policy");
}

struct InstanceRecord {
  PolicyKind policy{};
  std::uint64_t id = 0;
  Decision decision;
  double predicted = 0.0;
  double true_utility = 0.0;
  double worst_case = 0.0;
  bool true_in_ball = false;  // |x_true - x_pred|_2 <= epsilon
};

struct PolicySummary {
  PolicyKind policy{};
  double predicted = 0.0;
  double true_utility = 0.0;
  double worst_case = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  double epsilon = 0.0;
  std::vector<PolicySummary> summary;
  std::vector<InstanceRecord> records;  // grouped by policy, test order within

  const PolicySummary& of(PolicyKind k) const {
    for (const auto& s : summary)
      if (s.policy == k) return s;
    throw ConfigError("policy " + to_string(k) + " was not evaluated");
  }
};

inline InstanceRecord score(PolicyKind kind, const vec::ProblemInstance& inst, Decision a,
                            const UncertaintySet& set, const PgaConfig& pga) {
  InstanceRecord r;
  r.policy = kind;
  r.id = inst.id;
  r.predicted = vec::utility(inst.x_pred, a, inst.eta, inst.services, inst.clouds);
  r.true_utility = vec::utility(inst.x_true, a, inst.eta, inst.services, inst.clouds);
  r.worst_case = pga_worst_case(inst, a, set, pga).utility;
  r.true_in_ball = vec::prediction_error_norm(inst) <= set.epsilon();
  r.decision = std::move(a);
  return r;
}

inline EvalReport evaluate(const vec::Dataset& test, std::span<const PolicyKind> policies,
                           const PolicyModels& models, const UncertaintySet& set,
                           const PgaConfig& pga) {
  EvalReport rep;
  rep.epsilon = set.epsilon();
  for (auto kind : policies) {
    PolicySummary s;
    s.policy = kind;
    for (const auto& inst : test.instances) {
      auto r = score(kind, inst, decide(kind, inst, models), set, pga);
      s.predicted += r.predicted;
      s.true_utility += r.true_utility;
      s.worst_case += r.worst_case;
      rep.records.push_back(std::move(r));
    }
    s.count = test.instances.size();
    const double n = static_cast<double>(s.count);
    s.predicted /= n;
    s.true_utility /= n;
    s.worst_case /= n;
    rep.summary.push_back(s);
  }
  return rep;
}

inline constexpr const char* kSummarySchema = "lrco-eval-summary/1";
inline constexpr const char* kInstanceSchema = "lrco-eval-instances/1";
inline constexpr const char* kCdfSchema = "lrco-eval-cdf/1";
inline constexpr const char* kBenchSchema = "lrco-bench-time/1";
inline constexpr const char* kSweepSchema = "lrco-sweep/1";
inline constexpr const char* kCurveSchema = "lrco-training-curve/1";
inline constexpr const char* kBudgetSchema = "lrco-error-budget/1";

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

inline void write_summary(std::ostream& os, const EvalReport& r) {
  os << "#schema=" << kSummarySchema << " epsilon=" << format_real(r.epsilon) << '\n';
  os << "policy,predicted_utility,true_utility,worst_case_utility,instances\n";
  for (const auto& s : r.summary)
    os << to_string(s.policy) << ',' << format_real(s.predicted) << ',' << format_real(s.true_utility)
       << ',' << format_real(s.worst_case) << ',' << s.count << '\n';
}

inline void write_instances(std::ostream& os, const EvalReport& r) {
  os << "#schema=" << kInstanceSchema << " epsilon=" << format_real(r.epsilon) << '\n';
  os << "policy,id,decision,predicted_utility,true_utility,worst_case_utility,true_in_ball\n";
  for (const auto& x : r.records)
    os << to_string(x.policy) << ',' << x.id << ',' << x.decision.to_string() << ','
       << format_real(x.predicted) << ',' << format_real(x.true_utility) << ','
       << format_real(x.worst_case) << ',' << (x.true_in_ball ? 1 : 0) << '\n';
}

// One ascending column per (policy, metric); row r is the r-th smallest value,
// with empirical CDF level (r + 1) / n.
inline void write_cdf(std::ostream& os, const EvalReport& r) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  for (const auto& s : r.summary) {
    std::vector<double> p, t, w;
    for (const auto& x : r.records) {
      if (x.policy != s.policy) continue;
      p.push_back(x.predicted);
      t.push_back(x.true_utility);
      w.push_back(x.worst_case);
    }
    for (auto* v : {&p, &t, &w}) std::sort(v->begin(), v->end());
    const auto name = to_string(s.policy);
    names.push_back(name + "_predicted");
    cols.push_back(std::move(p));
    names.push_back(name + "_true");
    cols.push_back(std::move(t));
    names.push_back(name + "_worst_case");
    cols.push_back(std::move(w));
  }
  os << "#schema=" << kCdfSchema << '\n' << "cdf";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  const std::size_t rows = cols.empty() ? 0 : cols.front().size();
  for (std::size_t i = 0; i < rows; ++i) {
    os << format_real(static_cast<double>(i + 1) / static_cast<double>(rows));
    for (const auto& c : cols) os << ',' << format_real(c[i]);
    os << '\n';
  }
}

inline void write_report(const fs::path& dir, const EvalReport& r) {
  auto a = open_output(dir / "summary.csv");
  write_summary(a, r);
  auto b = open_output(dir / "per_instance.csv");
  write_instances(b, r);
  auto c = open_output(dir / "cdf.csv");
  write_cdf(c, r);
}

// ---------------------------------------------------------------------------
// Timing.
// ---------------------------------------------------------------------------

struct TimingStats {
  PolicyKind policy{};
  std::vector<double> pass_seconds;
  double mean = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double normalized_mean = 0.0;  // mean / Oracle mean
};

// One untimed warm-up pass, then `runs` timed passes of decision making over
// the instances, per policy.
inline std::vector<TimingStats> bench_time(std::span<const vec::ProblemInstance> instances,
                                           std::span<const PolicyKind> policies,
                                           const PolicyModels& models, int runs) {
  using Clock = std::chrono::steady_clock;
  std::vector<TimingStats> out;
  std::size_t sink = 0;
  for (auto kind : policies) {
    TimingStats t;
    t.policy = kind;
    for (int r = -1; r < runs; ++r) {
      const auto start = Clock::now();
      for (const auto& inst : instances) sink += decide(kind, inst, models).active_count();
      const std::chrono::duration<double> dt = Clock::now() - start;
      if (r >= 0) t.pass_seconds.push_back(dt.count());
    }
    const auto& v = t.pass_seconds;
    t.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    t.q1 = vec::percentile(v, 25.0);
    t.median = vec::percentile(v, 50.0);
    t.q3 = vec::percentile(v, 75.0);
    out.push_back(std::move(t));
  }
  double oracle_mean = 0.0;
  for (const auto& t : out)
    if (t.policy == PolicyKind::oracle) oracle_mean = t.mean;
  for (auto& t : out) t.normalized_mean = oracle_mean > 0.0 ? t.mean / oracle_mean : 0.0;
  if (sink == static_cast<std::size_t>(-1)) std::cerr << '\n';
  return out;
}

inline void write_bench(std::ostream& os, const std::vector<TimingStats>& stats, std::size_t instances) {
  os << "#schema=" << kBenchSchema << " instances=" << instances << '\n';
  os << "policy,runs,mean_seconds,q1_seconds,median_seconds,q3_seconds,normalized_mean,"
        "normalized_q1,normalized_median,normalized_q3\n";
  for (const auto& t : stats) {
    const double scale = t.mean > 0.0 && t.normalized_mean > 0.0 ? t.normalized_mean / t.mean : 0.0;
    os << to_string(t.policy) << ',' << t.pass_seconds.size() << ',' << format_real(t.mean) << ','
       << format_real(t.q1) << ',' << format_real(t.median) << ',' << format_real(t.q3) << ','
       << format_real(t.normalized_mean) << ',' << format_real(t.q1 * scale) << ','
       << format_real(t.median * scale) << ',' << format_real(t.q3 * scale) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Pipeline steps.
// ---------------------------------------------------------------------------

struct Paths {
  fs::path root;

  fs::path raw(const std::string& split) const { return root / "data" / ("raw_" + split + ".csv"); }
  fs::path annotated(const std::string& split, const std::string& predictor) const {
    return root / "data" / (split + "_" + predictor + ".csv");
  }
  fs::path budget() const { return root / "data" / "budget.csv"; }
  fs::path predictor(const std::string& kind) const { return root / "predictors" / (kind + ".txt"); }
  fs::path models(const std::string& predictor) const { return root / "models" / predictor; }
  fs::path eval(const std::string& predictor) const { return root / "eval" / predictor; }
  fs::path bench(const std::string& predictor) const { return root / "bench" / predictor; }
  fs::path sweep(const std::string& predictor) const { return root / "sweep" / predictor; }
};

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> s{"train", "val", "test"};
  return s;
}

inline void write_dataset_file(const fs::path& path, const vec::Dataset& ds) {
  auto os = open_output(path);
  vec::write_dataset(os, ds);
}

inline vec::Dataset read_dataset_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("missing dataset " + path.string() + " (run gen-data first)");
  return vec::read_dataset(path.string());
}

struct BudgetRow {
  std::string predictor;
  double epsilon = 0.0;
  double mse = 0.0;
};

// Fits both predictors on the raw training split, writes them, the annotated
// splits and the error budgets measured on the validation split.
inline std::vector<BudgetRow> fit_predictors(const RunConfig& cfg, const Paths& paths,
                                             std::ostream& log = std::cerr) {
  std::map<std::string, vec::Dataset> raw;
  for (const auto& s : split_names()) raw[s] = read_dataset_file(paths.raw(s));
  const auto linear = vec::fit_linear(raw["train"]);
  vec::ResidualFitConfig rc;
  rc.epochs = cfg.data.residual_epochs;
  rc.seed = derive_seed(cfg.seed, 0x5e51d);
  const auto residual = vec::fit_residual(raw["train"], linear, rc);

  std::vector<BudgetRow> rows;
  for (const vec::SuccessRatePredictor* p :
       std::initializer_list<const vec::SuccessRatePredictor*>{&linear, &residual}) {
    fs::create_directories(paths.predictor(p->kind()).parent_path());
    vec::save_predictor(paths.predictor(p->kind()).string(), *p);
    for (const auto& s : split_names())
      write_dataset_file(paths.annotated(s, p->kind()), vec::annotate(raw[s], *p));
    const auto val = vec::annotate(raw["val"], *p);
    rows.push_back({p->kind(), vec::error_budget(val, cfg.data.percentile), vec::mean_squared_error(val)});
    log << "predictor " << p->kind() << ": epsilon=" << format_real(rows.back().epsilon)
        << " mse=" << format_real(rows.back().mse) << '\n';
  }
  auto os = open_output(paths.budget());
  os << "#schema=" << kBudgetSchema << " percentile=" << format_real(cfg.data.percentile)
     << " split=val\n";
  os << "predictor,epsilon,mse\n";
  for (const auto& r : rows) os << r.predictor << ',' << format_real(r.epsilon) << ',' << format_real(r.mse) << '\n';
  return rows;
}

inline std::vector<BudgetRow> gen_data(const RunConfig& cfg, const Paths& paths,
                                       std::ostream& log = std::cerr) {
  vec::GenerationConfig g;
  g.services = cfg.data.services;
  g.clouds = cfg.data.clouds;
  g.rounds = cfg.data.rounds;
  const auto d = vec::generate_dataset(cfg.data.train, cfg.data.val, cfg.data.test, cfg.seed, g);
  write_dataset_file(paths.raw("train"), d.train);
  write_dataset_file(paths.raw("val"), d.val);
  write_dataset_file(paths.raw("test"), d.test);
  log << "generated " << cfg.data.train << "/" << cfg.data.val << "/" << cfg.data.test
      << " instances at M=" << g.services << " C=" << g.clouds << '\n';
  return fit_predictors(cfg, paths, log);
}

inline double read_budget(const Paths& paths, const std::string& predictor) {
  std::ifstream is(paths.budget());
  if (!is) throw ConfigError("missing " + paths.budget().string() + " (run gen-data first)");
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto parts = split(line, ',');
    if (parts.size() >= 2 && parts[0] == predictor) return parse_real(parts[1]);
  }
  throw ConfigError("no error budget recorded for predictor " + predictor);
}

inline UncertaintySet uncertainty_for(const RunConfig& cfg, const Paths& paths) {
  const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : read_budget(paths, cfg.predictor);
  return UncertaintySet(eps, cfg.p);
}

inline void write_curve(const fs::path& path, const std::vector<MinimizerTrainLog>& phases) {
  auto os = open_output(path);
  os << "#schema=" << kCurveSchema << '\n' << "iteration,epoch,mean_worst_case_cost\n";
  for (std::size_t k = 0; k < phases.size(); ++k)
    for (std::size_t e = 0; e < phases[k].epoch_mean_cost.size(); ++e)
      os << k << ',' << e << ',' << format_real(phases[k].epoch_mean_cost[e]) << '\n';
}

struct TrainOutcome {
  std::optional<LrcoModel> lrco;
  std::optional<MinimizerPolicy> lco;
  CoTrainingLog log;
};

enum class TrainTarget { both, lrco, lco };

inline Manifest run_manifest(const RunConfig& cfg, const vec::Dataset& train) {
  auto m = describe(cfg.lrco);
  m["profile"] = cfg.profile;
  m["predictor"] = cfg.predictor;
  m["dataset_hash"] = std::to_string(dataset_hash(train));
  return m;
}

inline TrainOutcome train(const RunConfig& cfg, const Paths& paths, TrainTarget target,
                          std::ostream& log = std::cerr) {
  const auto train_ds = read_dataset_file(paths.annotated("train", cfg.predictor));
  const auto val_ds = read_dataset_file(paths.annotated("val", cfg.predictor));
  const auto set = uncertainty_for(cfg, paths);
  const auto train_set = make_training_set(train_ds);
  const auto val_set = make_training_set(val_ds);
  auto lcfg = cfg.lrco;
  lcfg.seed = cfg.seed;
  auto manifest = run_manifest(cfg, train_ds);
  manifest["seed"] = std::to_string(cfg.seed);
  const auto dir = paths.models(cfg.predictor);

  TrainOutcome out;
  if (target != TrainTarget::lco) {
    log << "training lrco (" << cfg.predictor << ", epsilon=" << format_real(set.epsilon()) << ")\n";
    out.lrco = iterative_train(train_set, set, lcfg, &out.log, &val_set);
    save_model(dir / "lrco", *out.lrco, manifest);
    write_curve(dir / "curve_lrco.csv", out.log.minimizer_phases);
    for (std::size_t k = 0; k < out.log.marginal_entropy.size(); ++k)
      log << "  iteration " << k << ": marginal entropy " << format_real(out.log.marginal_entropy[k])
          << (k < out.log.validation_worst.size()
                  ? " validation worst-case cost " + format_real(out.log.validation_worst[k])
                  : std::string())
          << '\n';
  }
  if (target != TrainTarget::lrco && (cfg.train_lco || target == TrainTarget::lco)) {
    log << "training lco (" << cfg.predictor << ")\n";
    std::vector<MinimizerTrainLog> phases;
    out.lco = train_lco(train_set, lcfg, &phases);
    save_lco(dir / "lco", *out.lco, manifest);
    write_curve(dir / "curve_lco.csv", phases);
  }
  return out;
}

struct LoadedModels {
  std::optional<LrcoModel> lrco;
  std::optional<MinimizerPolicy> lco;

  PolicyModels view(const RunConfig& cfg) const {
    PolicyModels m;
    m.lrco = lrco ? &*lrco : nullptr;
    m.lco = lco ? &*lco : nullptr;
    m.candidates = cfg.lrco.candidates;
    m.seed = cfg.seed;
    return m;
  }
};

inline LoadedModels load_models(const RunConfig& cfg, const Paths& paths) {
  LoadedModels m;
  const auto dir = paths.models(cfg.predictor);
  auto wants = [&](PolicyKind k) {
    return std::find(cfg.policies.begin(), cfg.policies.end(), k) != cfg.policies.end();
  };
  if (wants(PolicyKind::lrco)) {
    if (!fs::exists(dir / "lrco" / "run.txt"))
      throw ConfigError("missing LRCO bundle in " + (dir / "lrco").string() + " (run train first)");
    m.lrco = load_model(dir / "lrco");
  }
  if (wants(PolicyKind::lco)) {
    if (!fs::exists(dir / "lco" / "run.txt"))
      throw ConfigError("missing LCO bundle in " + (dir / "lco").string() + " (run train first)");
    m.lco = load_lco(dir / "lco");
  }
  return m;
}

inline EvalReport run_eval(const RunConfig& cfg, const Paths& paths, std::ostream& log = std::cerr) {
  const auto test = read_dataset_file(paths.annotated("test", cfg.predictor));
  const auto set = uncertainty_for(cfg, paths);
  const auto models = load_models(cfg, paths);
  auto report = evaluate(test, cfg.policies, models.view(cfg), set, cfg.pga);
  write_report(paths.eval(cfg.predictor), report);
  for (const auto& s : report.summary)
    log << to_string(s.policy) << ": predicted " << format_real(s.predicted) << " true "
        << format_real(s.true_utility) << " worst-case " << format_real(s.worst_case) << '\n';
  return report;
}

inline std::vector<TimingStats> run_bench(const RunConfig& cfg, const Paths& paths,
                                          std::ostream& log = std::cerr) {
  const auto test = read_dataset_file(paths.annotated("test", cfg.predictor));
  const auto models = load_models(cfg, paths);
  const auto n = std::min(cfg.bench_instances, test.instances.size());
  const std::span<const vec::ProblemInstance> subset(test.instances.data(), n);
  const auto stats = bench_time(subset, cfg.policies, models.view(cfg), cfg.bench_runs);
  auto os = open_output(paths.bench(cfg.predictor) / "bench_time.csv");
  write_bench(os, stats, n);
  for (const auto& t : stats)
    log << to_string(t.policy) << ": " << format_real(t.mean) << " s per pass, normalized "
        << format_real(t.normalized_mean) << '\n';
  return stats;
}

enum class SweepAxis { samples, hidden, ensemble };

inline SweepAxis sweep_axis_from_string(std::string_view s) {
  if (s == "samples") return SweepAxis::samples;
  if (s == "hidden") return SweepAxis::hidden;
  if (s == "ensemble") return SweepAxis::ensemble;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "' (samples, hidden, ensemble)");
}

struct SweepRow {
  std::string setting;
  double worst_case = 0.0;
  double true_utility = 0.0;
  double predicted = 0.0;
};

// Mean utilities of one LRCO variant on the test split.
inline SweepRow evaluate_variant(const std::string& setting, const LrcoModel& model,
                                 const vec::Dataset& test, const UncertaintySet& set,
                                 const RunConfig& cfg, int candidates) {
  PolicyModels m;
  m.lrco = &model;
  m.candidates = candidates;
  m.seed = cfg.seed;
  const PolicyKind only[] = {PolicyKind::lrco};
  const auto r = evaluate(test, only, m, set, cfg.pga);
  return {setting, r.summary[0].worst_case, r.summary[0].true_utility, r.summary[0].predicted};
}

// Samples: the trained bundle at each K; the K candidate sets are nested
// because every K draws from the same per-instance stream. Hidden and
// ensemble train one variant per setting on the same seed.
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg, const Paths& paths, SweepAxis axis,
                                       std::ostream& log = std::cerr) {
  const auto test = read_dataset_file(paths.annotated("test", cfg.predictor));
  const auto set = uncertainty_for(cfg, paths);
  std::vector<SweepRow> rows;
  std::string name;
  auto train_variant = [&](const LrcoConfig& lc) {
    const auto train_set = make_training_set(read_dataset_file(paths.annotated("train", cfg.predictor)));
    auto c = lc;
    c.seed = cfg.seed;
    return iterative_train(train_set, set, c);
  };
  switch (axis) {
    case SweepAxis::samples: {
      name = "samples";
      const auto dir = paths.models(cfg.predictor) / "lrco";
      if (!fs::exists(dir / "run.txt")) throw ConfigError("missing LRCO bundle in " + dir.string());
      const auto model = load_model(dir);
      for (int k : cfg.sweep_samples)
        rows.push_back(evaluate_variant("K=" + std::to_string(k), model, test, set, cfg, k));
      break;
    }
    case SweepAxis::hidden:
      name = "hidden";
      for (int h : cfg.sweep_hidden) {
        auto lc = cfg.lrco;
        lc.minimizer_hidden = {h, h};
        log << "training hidden=" << h << '\n';
        rows.push_back(evaluate_variant("hidden=" + std::to_string(h), train_variant(lc), test, set,
                                        cfg, cfg.lrco.candidates));
      }
      break;
    case SweepAxis::ensemble: {
      name = "ensemble";
      std::vector<std::pair<std::string, std::vector<double>>> variants{
          {"ensemble", cfg.lrco.lambdas}, {"single_lambda=1", {1.0}}, {"single_lambda=10", {10.0}}};
      for (const auto& [label, lambdas] : variants) {
        auto lc = cfg.lrco;
        lc.lambdas = lambdas;
        log << "training " << label << '\n';
        rows.push_back(evaluate_variant(label, train_variant(lc), test, set, cfg, cfg.lrco.candidates));
      }
      break;
    }
  }
  auto os = open_output(paths.sweep(cfg.predictor) / ("sweep_" + name + ".csv"));
  os << "#schema=" << kSweepSchema << " axis=" << name << " epsilon=" << format_real(set.epsilon()) << '\n';
  os << "setting,worst_case_utility,true_utility,predicted_utility\n";
  for (const auto& r : rows) {
    os << r.setting << ',' << format_real(r.worst_case) << ',' << format_real(r.true_utility) << ','
       << format_real(r.predicted) << '\n';
    log << r.setting << ": worst-case " << format_real(r.worst_case) << '\n';
  }
  return rows;
}

}  // namespace lrco::eval
