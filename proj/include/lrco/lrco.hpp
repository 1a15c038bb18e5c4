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
//  The learned robust optimizer: a policy (minimizer) paired with a maximizer
//  ensemble.
//
//  Inference samples K candidates from the policy, scores each by its
//  ensemble worst case and returns the candidate with the smallest one.
//
//  Co-training pretrains the ensemble on uniformly random decisions, trains
//  the policy against it, then repeats: average the policy's per-group
//  probabilities over the training contexts, draw a fresh decision set from
//  that marginal, retrain the ensemble on it and train the policy again.
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lrco/baselines.hpp"
#include "lrco/common.hpp"
#include "lrco/maximizer.hpp"
#include "lrco/minimizer.hpp"
#include "lrco/nn.hpp"
#include "lrco/problem.hpp"
#include "lrco/vec_env.hpp"

namespace lrco {

// Contexts the policy and maximizer see, with one cost per context.
struct RobustTrainingSet {
  std::vector<std::vector<double>> contexts;
  std::vector<CostFunction> costs;
  std::vector<nn::Vector> policy_inputs;
  std::vector<std::vector<double>> eta;  // empty when the costs are not offloading utilities
  int services = 0;
  int clouds = 0;

  std::size_t size() const { return contexts.size(); }
  int dim() const { return static_cast<int>(contexts.front().size()); }
};

// Policy inputs are centered and scaled to roughly [-2, 2].
inline constexpr double kRateInputScale = 4.0;
inline constexpr double kCostInputCenter = 0.03;
inline constexpr double kCostInputScale = 100.0;

inline nn::Vector encode_policy_input(std::span<const double> x, std::span<const double> eta) {
  nn::Vector v(static_cast<Eigen::Index>(x.size() + eta.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = kRateInputScale * (x[i] - 0.5);
  for (std::size_t i = 0; i < eta.size(); ++i)
    v(static_cast<Eigen::Index>(x.size() + i)) = kCostInputScale * (eta[i] - kCostInputCenter);
  return v;
}

inline RobustTrainingSet make_training_set(const vec::Dataset& ds) {
  if (ds.instances.empty()) throw ConfigError("dataset is empty");
  RobustTrainingSet set;
  set.services = ds.instances.front().services;
  set.clouds = ds.instances.front().clouds;
  for (const auto& inst : ds.instances) {
    set.contexts.push_back(inst.x_pred);
    set.eta.push_back(inst.eta);
    set.costs.push_back(vec::negative_utility_cost(inst.eta, inst.services, inst.clouds));
    set.policy_inputs.push_back(encode_policy_input(inst.x_pred, inst.eta));
  }
  return set;
}

struct LrcoConfig {
  MinimizerConfig minimizer{};
  MaximizerTrainConfig pretrain{};
  MaximizerTrainConfig retrain{};
  int max_iterate = 3;
  std::size_t decision_set_size = 512;
  std::size_t context_subsample = 2048;
  std::vector<double> lambdas{1.0, 1.0, 10.0, 10.0};
  std::vector<int> maximizer_hidden{400, 400};
  std::vector<int> minimizer_hidden{256, 256};
  int candidates = 1000;  // K
  double convergence_tol = 1e-3;
  std::size_t validation_contexts = 256;
  int validation_candidates = 100;
  std::uint64_t seed = 1;
};

struct LrcoModel {
  MinimizerPolicy policy;
  MaximizerEnsemble ensemble;
  UncertaintySet uncertainty;
  int candidates = 1000;
};

struct Inference {
  Decision decision;
  double worst_cost = std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;  // distinct candidates scored
};

// K draws from the policy, sorted and deduplicated.
inline std::vector<Decision> sample_candidates(std::span<const double> probs, int k, Rng& rng) {
  std::vector<Decision> c;
  c.reserve(static_cast<std::size_t>(std::max(k, 0)));
  for (int i = 0; i < k; ++i) c.push_back(sample_bernoulli(probs, rng));
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

// Candidate with the minimum ensemble worst case; candidates are sorted, so
// the first minimum is the lexicographically smallest one.
inline Inference infer(const LrcoModel& model, const nn::Vector& policy_input,
                       std::span<const double> x, const CostFunction& cost, int k, Rng& rng) {
  if (k < 1) throw ConfigError("inference needs at least one candidate");
  const auto probs = decision_distribution(model.policy, policy_input);
  const auto candidates = sample_candidates(probs, k, rng);
  const auto wc = ensemble_worst_case(model.ensemble, x, candidates, cost);
  Inference out;
  out.evaluated = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (wc[i].cost < out.worst_cost) {
      out.worst_cost = wc[i].cost;
      out.decision = candidates[i];
    }
  }
  return out;
}

inline constexpr std::uint64_t kInferenceStream = 0x1f3e;

inline Inference infer(const LrcoModel& model, const vec::ProblemInstance& inst, std::uint64_t seed,
                       std::optional<int> k = std::nullopt) {
  Rng rng = make_rng(seed, kInferenceStream, inst.id);
  const auto cost = vec::negative_utility_cost(inst.eta, inst.services, inst.clouds);
  return infer(model, encode_policy_input(inst.x_pred, inst.eta), inst.x_pred, cost,
               k.value_or(model.candidates), rng);
}

// ---------------------------------------------------------------------------
// Co-training.
// ---------------------------------------------------------------------------

// Per-group mean probability over contexts.
inline std::vector<double> marginal_distribution(const MinimizerPolicy& policy,
                                                 const std::vector<nn::Vector>& inputs) {
  std::vector<double> m(static_cast<std::size_t>(policy.groups()), 0.0);
  if (inputs.empty()) return m;
  const std::size_t chunk = 512;
  for (std::size_t start = 0; start < inputs.size(); start += chunk) {
    const auto end = std::min(inputs.size(), start + chunk);
    nn::Matrix x(policy.input_dim(), static_cast<Eigen::Index>(end - start));
    for (std::size_t i = start; i < end; ++i) x.col(static_cast<Eigen::Index>(i - start)) = inputs[i];
    const nn::Matrix p = decision_distribution(policy, x);
    for (std::size_t g = 0; g < m.size(); ++g) m[g] += p.row(static_cast<Eigen::Index>(g)).sum();
  }
  for (double& v : m) v /= static_cast<double>(inputs.size());
  return m;
}

// Mean binary entropy (bits) of the groups.
inline double mean_group_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0 && p < 1.0) h -= p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p);
  }
  return probs.empty() ? 0.0 : h / static_cast<double>(probs.size());
}

inline WorstCaseOracle ensemble_oracle(const MaximizerEnsemble& ens, const RobustTrainingSet& set) {
  return [&ens, &set](std::span<const std::size_t> idx, std::span<const Decision> decisions) {
    std::vector<WorstCaseQuery> qs;
    qs.reserve(idx.size());
    for (std::size_t q = 0; q < idx.size(); ++q)
      qs.push_back({set.contexts[idx[q]], &decisions[q], &set.costs[idx[q]]});
    const auto wc = ensemble_worst_case(ens, qs);
    std::vector<double> g;
    g.reserve(wc.size());
    for (const auto& w : wc) g.push_back(w.cost);
    return g;
  };
}

// Cost at the given context itself; the supervision signal of LCO.
inline WorstCaseOracle nominal_oracle(const RobustTrainingSet& set) {
  return [&set](std::span<const std::size_t> idx, std::span<const Decision> decisions) {
    std::vector<double> g;
    g.reserve(idx.size());
    for (std::size_t q = 0; q < idx.size(); ++q)
      g.push_back(set.costs[idx[q]](set.contexts[idx[q]], decisions[q]));
    return g;
  };
}

struct CoTrainingLog {
  std::vector<MinimizerTrainLog> minimizer_phases;
  std::vector<std::vector<MaximizerTrainLog>> ensemble_phases;
  std::vector<double> marginal_entropy;   // after each minimizer phase
  std::vector<double> validation_worst;   // mean worst-case cost of inferred decisions
  std::vector<std::vector<Decision>> decision_sets;
  bool converged = false;
};

namespace detail {

inline MaximizerData maximizer_data(const RobustTrainingSet& set,
                                    std::span<const std::size_t> subsample,
                                    std::vector<Decision> decisions) {
  MaximizerData d;
  for (auto i : subsample) {
    d.contexts.push_back(set.contexts[i]);
    d.costs.push_back(&set.costs[i]);
  }
  d.decisions = std::move(decisions);
  return d;
}

// Mean worst-case cost of the inferred decisions, scored by the projected
// gradient solver when the set carries offloading costs and by the ensemble
// otherwise.
inline double validation_cost(const LrcoModel& model, const RobustTrainingSet& val,
                              std::size_t count, int k, std::uint64_t seed) {
  const auto n = std::min(count, val.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, 0x7a1d, i);
    const auto out = infer(model, val.policy_inputs[i], val.contexts[i], val.costs[i], k, rng);
    total += val.eta.empty() ? out.worst_cost
                             : -pga_worst_case(val.contexts[i], out.decision, val.eta[i], val.services,
                                               val.clouds, model.uncertainty)
                                    .utility;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

}  // namespace detail

// max_iterate = n runs n + 1 policy phases and n ensemble retrains; with
// n = 0 the ensemble is only pretrained and the policy trained once.
inline LrcoModel iterative_train(const RobustTrainingSet& train, const UncertaintySet& set,
                                 const LrcoConfig& cfg, CoTrainingLog* log_out = nullptr,
                                 const RobustTrainingSet* validation = nullptr) {
  if (train.size() == 0) throw ConfigError("co-training needs at least one context");
  CoTrainingLog log;
  const int dim = train.dim();
  const auto groups = static_cast<std::size_t>(dim);

  Rng rng = make_rng(cfg.seed, 0xc07a);
  std::vector<std::size_t> subsample(train.size());
  std::iota(subsample.begin(), subsample.end(), 0);
  std::shuffle(subsample.begin(), subsample.end(), rng);
  subsample.resize(std::min(subsample.size(), cfg.context_subsample));
  std::sort(subsample.begin(), subsample.end());

  LrcoModel model;
  model.uncertainty = set;
  model.candidates = cfg.candidates;
  model.ensemble = MaximizerEnsemble::make(dim, set, derive_seed(cfg.seed, 0xe45), cfg.lambdas,
                                           cfg.maximizer_hidden);
  model.policy = MinimizerPolicy::make(static_cast<int>(train.policy_inputs.front().size()), dim,
                                       derive_seed(cfg.seed, 0x9011), cfg.minimizer_hidden);

  auto train_ensemble = [&](std::vector<Decision> decisions, const MaximizerTrainConfig& mcfg,
                            int round) {
    log.decision_sets.push_back(decisions);
    const auto data = detail::maximizer_data(train, subsample, std::move(decisions));
    std::vector<MaximizerTrainLog> logs;
    for (std::size_t m = 0; m < model.ensemble.size(); ++m) {
      auto c = mcfg;
      c.seed = derive_seed(cfg.seed, 0x3a7 + static_cast<std::uint64_t>(round), m);
      logs.push_back(train_maximizer(model.ensemble.members()[m], data, c));
    }
    log.ensemble_phases.push_back(std::move(logs));
  };

  std::vector<Decision> initial;
  for (std::size_t i = 0; i < cfg.decision_set_size; ++i)
    initial.push_back(uniform_binary_decision(groups, rng));
  train_ensemble(std::move(initial), cfg.pretrain, 0);

  auto mcfg = cfg.minimizer;
  mcfg.seed = derive_seed(cfg.seed, 0x5011);
  MinimizerTrainer trainer(model.policy, mcfg);
  auto policy_phase = [&]() {
    log.minimizer_phases.push_back(
        trainer.train(train.policy_inputs, ensemble_oracle(model.ensemble, train), mcfg.epochs));
    const auto marginal = marginal_distribution(model.policy, train.policy_inputs);
    log.marginal_entropy.push_back(mean_group_entropy(marginal));
    if (validation)
      log.validation_worst.push_back(detail::validation_cost(
          model, *validation, cfg.validation_contexts, cfg.validation_candidates, cfg.seed));
    return marginal;
  };

  auto marginal = policy_phase();
  LrcoModel best = model;
  for (int k = 1; k <= cfg.max_iterate; ++k) {
    std::vector<Decision> decisions;
    for (std::size_t i = 0; i < cfg.decision_set_size; ++i)
      decisions.push_back(sample_bernoulli(marginal, rng));
    train_ensemble(std::move(decisions), cfg.retrain, k);
    marginal = policy_phase();
    const auto& v = log.validation_worst;
    if (v.size() >= 2 && v[v.size() - 2] - v.back() < cfg.convergence_tol) {
      log.converged = true;
      // A phase that made validation worse is rolled back.
      if (v.back() > v[v.size() - 2]) model = best;
      break;
    }
    best = model;
  }
  if (log_out) *log_out = std::move(log);
  return model;
}

// LCO: the same policy and training loop supervised by the cost at the
// predicted context, with no maximizer.
inline MinimizerPolicy train_lco(const RobustTrainingSet& train, const LrcoConfig& cfg,
                                 std::vector<MinimizerTrainLog>* logs = nullptr) {
  if (train.size() == 0) throw ConfigError("LCO training needs at least one context");
  auto policy = MinimizerPolicy::make(static_cast<int>(train.policy_inputs.front().size()),
                                      train.dim(), derive_seed(cfg.seed, 0x9011),
                                      cfg.minimizer_hidden);
  auto mcfg = cfg.minimizer;
  mcfg.seed = derive_seed(cfg.seed, 0x5011);
  MinimizerTrainer trainer(policy, mcfg);
  const auto oracle = nominal_oracle(train);
  // Same number of policy epochs as the co-trained model.
  for (int phase = 0; phase <= cfg.max_iterate; ++phase) {
    auto l = trainer.train(train.policy_inputs, oracle, mcfg.epochs);
    if (logs) logs->push_back(std::move(l));
  }
  return policy;
}

// Best predicted cost among K policy samples; ties to the smaller decision.
inline Inference lco_infer(const MinimizerPolicy& policy, const nn::Vector& input,
                           std::span<const double> x, const CostFunction& cost, int k, Rng& rng) {
  const auto probs = decision_distribution(policy, input);
  const auto candidates = sample_candidates(probs, k, rng);
  Inference out;
  out.evaluated = candidates.size();
  for (const auto& a : candidates) {
    const double c = cost(x, a);
    if (c < out.worst_cost) {
      out.worst_cost = c;
      out.decision = a;
    }
  }
  return out;
}

inline Inference lco_infer(const MinimizerPolicy& policy, const vec::ProblemInstance& inst,
                           int k, std::uint64_t seed) {
  Rng rng = make_rng(seed, kInferenceStream, inst.id);
  const auto cost = vec::negative_utility_cost(inst.eta, inst.services, inst.clouds);
  return lco_infer(policy, encode_policy_input(inst.x_pred, inst.eta), inst.x_pred, cost, k, rng);
}

// ---------------------------------------------------------------------------
// Bundles.
//
//   <dir>/policy.txt          policy network checkpoint
//   <dir>/maximizer/          ensemble manifest and members (LRCO only)
//   <dir>/run.txt             key=value run manifest
// ---------------------------------------------------------------------------

using Manifest = std::map<std::string, std::string>;

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write manifest " + path.string());
  for (const auto& [k, v] : m) os << k << '=' << v << '\n';
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

inline Manifest describe(const LrcoConfig& cfg) {
  auto ints = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ":" : "") + std::to_string(v[i]);
    return s;
  };
  std::string lambdas;
  for (std::size_t i = 0; i < cfg.lambdas.size(); ++i)
    lambdas += (i ? ":" : "") + format_real(cfg.lambdas[i]);
  return {
      {"seed", std::to_string(cfg.seed)},
      {"max_iterate", std::to_string(cfg.max_iterate)},
      {"decision_set_size", std::to_string(cfg.decision_set_size)},
      {"context_subsample", std::to_string(cfg.context_subsample)},
      {"lambdas", lambdas},
      {"maximizer_hidden", ints(cfg.maximizer_hidden)},
      {"minimizer_hidden", ints(cfg.minimizer_hidden)},
      {"candidates", std::to_string(cfg.candidates)},
      {"minimizer.epochs", std::to_string(cfg.minimizer.epochs)},
      {"minimizer.batch", std::to_string(cfg.minimizer.batch)},
      {"minimizer.baseline_samples", std::to_string(cfg.minimizer.baseline_samples)},
      {"minimizer.lr", format_real(cfg.minimizer.lr)},
      {"minimizer.baseline", cfg.minimizer.baseline == BaselineSampling::policy ? "policy" : "uniform"},
      {"maximizer.pretrain_epochs", std::to_string(cfg.pretrain.epochs)},
      {"maximizer.retrain_epochs", std::to_string(cfg.retrain.epochs)},
      {"maximizer.lr", format_real(cfg.pretrain.lr)},
  };
}

inline void save_policy(const std::filesystem::path& path, const MinimizerPolicy& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write policy checkpoint " + path.string());
  nn::save_network(os, p.network());
}

inline MinimizerPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open policy checkpoint " + path.string());
  return MinimizerPolicy(nn::load_network(is));
}

inline void save_model(const std::filesystem::path& dir, const LrcoModel& model, Manifest run) {
  std::filesystem::create_directories(dir);
  save_policy(dir / "policy.txt", model.policy);
  save_ensemble(dir / "maximizer", model.ensemble);
  run["kind"] = "lrco";
  run["epsilon"] = format_real(model.uncertainty.epsilon());
  run["p"] = format_real(model.uncertainty.p());
  run["candidates"] = std::to_string(model.candidates);
  write_manifest(dir / "run.txt", run);
}

inline LrcoModel load_model(const std::filesystem::path& dir) {
  const auto run = read_manifest(dir / "run.txt");
  if (run.count("kind") == 0 || run.at("kind") != "lrco")
    throw ConfigError(dir.string() + " is not an LRCO bundle");
  LrcoModel m;
  m.policy = load_policy(dir / "policy.txt");
  m.ensemble = load_ensemble(dir / "maximizer");
  m.uncertainty = UncertaintySet(parse_real(run.at("epsilon")), parse_real(run.at("p")));
  m.candidates = static_cast<int>(parse_int(run.at("candidates")));
  return m;
}

inline void save_lco(const std::filesystem::path& dir, const MinimizerPolicy& policy, Manifest run) {
  std::filesystem::create_directories(dir);
  save_policy(dir / "policy.txt", policy);
  run["kind"] = "lco";
  write_manifest(dir / "run.txt", run);
}

inline MinimizerPolicy load_lco(const std::filesystem::path& dir) {
  const auto run = read_manifest(dir / "run.txt");
  if (run.count("kind") == 0 || run.at("kind") != "lco")
    throw ConfigError(dir.string() + " is not an LCO bundle");
  return load_policy(dir / "policy.txt");
}

// FNV-1a over a byte string; identifies the dataset a bundle was trained on.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t dataset_hash(const vec::Dataset& ds) {
  std::ostringstream os;
  vec::write_dataset(os, ds);
  return fnv1a(os.str());
}

}  // namespace lrco
