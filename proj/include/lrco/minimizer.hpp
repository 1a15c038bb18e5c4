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
//  Policy over binary decision groups, P(a | x) = prod_i p_i(x)^a_i (1 - p_i(x))^(1 - a_i),
//  trained by a baseline-corrected policy gradient. For each context in a
//  batch: sample a ~ P(.|x), score it with the worst-case oracle G(x, a),
//  score |S| uniform decisions for the baseline V(x), and step along
//  (G - V) * grad log P(a | x) to lower the expected worst-case cost.
//  With policy-sampled baselines, |S| + 1 decisions are drawn from P(.|x)
//  and each is scored against the mean of the other |S|.
//

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lrco/common.hpp"
#include "lrco/nn.hpp"
#include "lrco/problem.hpp"

namespace lrco {

class MinimizerPolicy {
 public:
  MinimizerPolicy() = default;
  explicit MinimizerPolicy(nn::Network net) : net_(std::move(net)) {
    if (net_.layers().back().activation() != nn::Activation::sigmoid)
      throw ConfigError("policy output layer must be sigmoid");
  }

  static MinimizerPolicy make(int input_dim, int groups, std::uint64_t seed,
                              std::vector<int> hidden = {256, 256},
                              nn::Init final_init = nn::Init::xavier) {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(groups);
    Rng rng = make_rng(seed, 0x9011c7);
    return MinimizerPolicy(
        nn::Network::make(sizes, nn::Activation::relu, nn::Activation::sigmoid, rng, final_init));
  }

  int input_dim() const { return static_cast<int>(net_.in_dim()); }
  int groups() const { return static_cast<int>(net_.out_dim()); }
  const nn::Network& network() const { return net_; }
  nn::Network& network() { return net_; }

 private:
  nn::Network net_;
};

// Bernoulli parameter of every group, in (0, 1).
inline std::vector<double> decision_distribution(const MinimizerPolicy& policy,
                                                 const nn::Vector& input) {
  if (input.size() != policy.input_dim()) throw ConfigError("policy input has the wrong dimension");
  const nn::Vector p = nn::predict(policy.network(), input);
  return {p.data(), p.data() + p.size()};
}

// One column of probabilities per input column.
inline nn::Matrix decision_distribution(const MinimizerPolicy& policy, const nn::Matrix& inputs) {
  return nn::predict(policy.network(), inputs);
}

// log P(a | x) = sum_i log p_i(a_i), computed from the probabilities.
inline double log_probability(std::span<const double> probs, const Decision& a) {
  double lp = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) lp += std::log(a[i] ? probs[i] : 1.0 - probs[i]);
  return lp;
}

inline Decision uniform_binary_decision(std::size_t groups, Rng& rng) {
  Decision d(groups);
  for (std::size_t i = 0; i < groups; ++i) d[i] = (rng() >> 63) ? 1 : 0;
  return d;
}

// G for a batch of (context index, decision) queries.
using WorstCaseOracle =
    std::function<std::vector<double>(std::span<const std::size_t>, std::span<const Decision>)>;

enum class PolicyGradientForm {
  score_function,  // (G - V) grad log P
  probability,     // (G - V) grad P, the literal printed form
};

enum class BaselineSampling {
  uniform,  // |S| uniform decisions, one policy sample scored
  policy,   // |S|+1 policy samples, each scored against the mean of the others
};

struct MinimizerConfig {
  int epochs = 200;
  int batch = 64;
  int baseline_samples = 16;  // |S|
  double lr = 1e-3;
  int decay_every = 20;
  double decay = 0.9;
  double clip_norm = 5.0;
  PolicyGradientForm form = PolicyGradientForm::score_function;
  BaselineSampling baseline = BaselineSampling::uniform;
  int divergence_window = 5;
  int divergence_patience = 10;
  std::uint64_t seed = 1;
};

struct PolicyBatch {
  nn::Gradients gradients;  // mean over the batch, unclipped
  double mean_cost = 0.0;   // mean G of sampled decisions
  double mean_baseline = 0.0;
  std::vector<Decision> sampled;
  std::vector<double> advantage;
};

// One batch of the baseline-corrected policy gradient.
inline PolicyBatch policy_gradient_batch(const MinimizerPolicy& policy,
                                         const std::vector<nn::Vector>& inputs,
                                         std::span<const std::size_t> batch,
                                         const WorstCaseOracle& worst_case,
                                         const MinimizerConfig& cfg, Rng& rng) {
  if (batch.empty()) throw ConfigError("policy gradient batch is empty");
  const auto b = batch.size();
  const auto groups = static_cast<std::size_t>(policy.groups());
  const auto s_count = static_cast<std::size_t>(std::max(cfg.baseline_samples, 1));

  nn::Matrix x(policy.input_dim(), static_cast<Eigen::Index>(b));
  for (std::size_t i = 0; i < b; ++i) x.col(static_cast<Eigen::Index>(i)) = inputs[batch[i]];
  auto [probs, tape] = nn::forward(policy.network(), x);

  PolicyBatch out;
  const bool leave_one_out = cfg.baseline == BaselineSampling::policy;
  const std::size_t per = 1 + s_count;
  std::vector<std::size_t> q_ctx;
  std::vector<Decision> q_dec;
  q_ctx.reserve(b * per);
  q_dec.reserve(b * per);
  for (std::size_t i = 0; i < b; ++i) {
    const auto col = probs.col(static_cast<Eigen::Index>(i));
    const std::span<const double> p(col.data(), groups);
    out.sampled.push_back(sample_bernoulli(p, rng));
    q_ctx.push_back(batch[i]);
    q_dec.push_back(out.sampled.back());
    for (std::size_t s = 0; s < s_count; ++s) {
      q_ctx.push_back(batch[i]);
      q_dec.push_back(leave_one_out ? sample_bernoulli(p, rng) : uniform_binary_decision(groups, rng));
    }
  }
  const auto g = worst_case(q_ctx, q_dec);
  if (g.size() != q_dec.size()) throw ConfigError("worst-case oracle returned the wrong count");

  // d/d(logit_i) log P(a|x) = a_i - p_i.
  nn::Matrix dz = nn::Matrix::Zero(probs.rows(), probs.cols());
  const auto accumulate = [&](std::size_t i, const Decision& a, double weight) {
    const auto c = static_cast<Eigen::Index>(i);
    if (cfg.form == PolicyGradientForm::probability) {
      const auto col = probs.col(c);
      weight *= std::exp(log_probability(std::span<const double>(col.data(), groups), a));
    }
    for (std::size_t k = 0; k < groups; ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      dz(r, c) += weight * (static_cast<double>(a[k]) - probs(r, c)) / static_cast<double>(b);
    }
  };
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t base = i * per;
    double v = 0.0;
    for (std::size_t s = 1; s <= s_count; ++s) v += g[base + s];
    v /= static_cast<double>(s_count);
    const double adv = g[base] - v;
    out.advantage.push_back(adv);
    out.mean_cost += g[base];
    out.mean_baseline += v;
    if (!leave_one_out) {
      accumulate(i, out.sampled[i], adv);
      continue;
    }
    double sum = 0.0;
    for (std::size_t s = 0; s < per; ++s) sum += g[base + s];
    for (std::size_t s = 0; s < per; ++s) {
      const double others = (sum - g[base + s]) / static_cast<double>(s_count);
      accumulate(i, q_dec[base + s], (g[base + s] - others) / static_cast<double>(per));
    }
  }
  out.mean_cost /= static_cast<double>(b);
  out.mean_baseline /= static_cast<double>(b);
  out.gradients = nn::backward(policy.network(), tape, dz, nn::GradientAt::preactivation);
  return out;
}

struct MinimizerTrainLog {
  std::vector<double> epoch_mean_cost;
  bool diverged = false;
  std::size_t rejected_steps = 0;
};

// Holds the Adam state and epoch counter so training can resume between
// co-training rounds with an unbroken learning-rate schedule.
class MinimizerTrainer {
 public:
  MinimizerTrainer(MinimizerPolicy& policy, MinimizerConfig cfg)
      : policy_(policy), cfg_(cfg), adam_(nn::AdamState::for_network(policy.network())),
        rng_(make_rng(cfg.seed, 0x5eed)) {}

  MinimizerTrainLog train(const std::vector<nn::Vector>& inputs, const WorstCaseOracle& worst_case,
                          int epochs) {
    if (inputs.empty()) throw ConfigError("minimizer training needs contexts");
    MinimizerTrainLog log;
    const auto batch = static_cast<std::size_t>(std::max(cfg_.batch, 1));
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> smoothed;
    double best_smoothed = std::numeric_limits<double>::infinity();
    MinimizerPolicy best = policy_;
    int rising = 0;
    for (int e = 0; e < epochs; ++e, ++epoch_) {
      const double lr = nn::step_decay(cfg_.lr, epoch_, cfg_.decay_every, cfg_.decay);
      std::shuffle(order.begin(), order.end(), rng_);
      double total = 0.0;
      std::size_t steps = 0;
      for (std::size_t start = 0; start < order.size(); start += batch, ++steps) {
        const auto end = std::min(order.size(), start + batch);
        auto pb = policy_gradient_batch(policy_, inputs,
                                        std::span<const std::size_t>(order).subspan(start, end - start),
                                        worst_case, cfg_, rng_);
        nn::clip_global_norm(pb.gradients, cfg_.clip_norm);
        if (!nn::adam_step(policy_.network(), pb.gradients, adam_, lr).applied) ++log.rejected_steps;
        total += pb.mean_cost;
      }
      log.epoch_mean_cost.push_back(total / static_cast<double>(steps));

      // Divergence: the moving average rises `patience` epochs in a row.
      const auto w = static_cast<std::size_t>(std::max(cfg_.divergence_window, 1));
      const auto& c = log.epoch_mean_cost;
      const auto from = c.size() > w ? c.size() - w : 0;
      const double avg =
          std::accumulate(c.begin() + static_cast<std::ptrdiff_t>(from), c.end(), 0.0) /
          static_cast<double>(c.size() - from);
      if (!smoothed.empty() && avg > smoothed.back()) {
        ++rising;
      } else {
        rising = 0;
      }
      smoothed.push_back(avg);
      if (avg < best_smoothed) {
        best_smoothed = avg;
        best = policy_;
      }
      if (rising >= cfg_.divergence_patience) {
        std::cerr << "warning: minimizer cost rising for " << rising
                  << " epochs; restoring the best checkpoint\n";
        policy_ = best;
        log.diverged = true;
        ++epoch_;
        break;
      }
    }
    return log;
  }

  int epochs_done() const { return epoch_; }

 private:
  MinimizerPolicy& policy_;
  MinimizerConfig cfg_;
  nn::AdamState adam_;
  Rng rng_;
  int epoch_ = 0;
};

inline MinimizerTrainLog train_minimizer(MinimizerPolicy& policy,
                                         const std::vector<nn::Vector>& inputs,
                                         const WorstCaseOracle& worst_case,
                                         const MinimizerConfig& cfg) {
  MinimizerTrainer trainer(policy, cfg);
  return trainer.train(inputs, worst_case, cfg.epochs);
}

// Most likely decision: a_i = 1 iff p_i > 0.5.
inline Decision mode_decision(std::span<const double> probs) {
  Decision d(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) d[i] = probs[i] > 0.5 ? 1 : 0;
  return d;
}

}  // namespace lrco
