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
//  Learned inner maximization. A maximizer network maps (context, decision)
//  to a context error delta; it is trained to maximize the cost at
//  context + delta, with a hinge penalty on leaving the uncertainty ball:
//
//      loss(x, a, delta) = -f(x + delta, a) + lambda * max(|delta|_p - eps, 0)
//
//  The output head is tanh scaled by eps and multiplied by the decision, so
//  delta_i = 0 wherever a_i = 0. Proposals are scaled back onto the ball
//  before use. An ensemble keeps the worst case over its members.
//

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lrco/common.hpp"
#include "lrco/nn.hpp"
#include "lrco/problem.hpp"

namespace lrco {

class MaximizerNet {
 public:
  MaximizerNet() = default;
  MaximizerNet(nn::Network net, UncertaintySet set, double lambda)
      : net_(std::move(net)), set_(set), lambda_(lambda) {
    if (net_.in_dim() != 2 * net_.out_dim())
      throw ConfigError("maximizer input must be [context; decision]");
    if (lambda < 0.0) throw ConfigError("penalty weight must be >= 0");
  }

  // dim -> hidden... -> dim with relu hidden layers and a tanh head.
  static MaximizerNet make(int dim, const UncertaintySet& set, double lambda, std::uint64_t seed,
                           std::vector<int> hidden = {400, 400},
                           nn::Init final_init = nn::Init::xavier) {
    std::vector<int> sizes{2 * dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(dim);
    Rng rng = make_rng(seed, 0x3a71);
    return {nn::Network::make(sizes, nn::Activation::relu, nn::Activation::tanh, rng, final_init),
            set, lambda};
  }

  int dim() const { return static_cast<int>(net_.out_dim()); }
  const nn::Network& network() const { return net_; }
  nn::Network& network() { return net_; }
  const UncertaintySet& uncertainty() const { return set_; }
  double lambda() const { return lambda_; }

 private:
  nn::Network net_;
  UncertaintySet set_;
  double lambda_ = 1.0;
};

inline nn::Vector encode_maximizer_input(std::span<const double> x, const Decision& a) {
  nn::Vector v(static_cast<Eigen::Index>(x.size() + a.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = x[i];
  for (std::size_t i = 0; i < a.size(); ++i)
    v(static_cast<Eigen::Index>(x.size() + i)) = static_cast<double>(a[i]);
  return v;
}

// Unprojected, masked proposals eps * head(x, a) * a, one column per input.
inline nn::Matrix raw_deltas(const MaximizerNet& m, const nn::Matrix& inputs) {
  const auto dim = m.dim();
  nn::Matrix out = nn::predict(m.network(), inputs);
  out.array() *= m.uncertainty().epsilon() * inputs.bottomRows(dim).array();
  return out;
}

inline std::vector<double> column(const nn::Matrix& m, Eigen::Index c) {
  return {m.col(c).data(), m.col(c).data() + m.rows()};
}

// Projected proposals, one column per input.
inline nn::Matrix propose_deltas(const MaximizerNet& m, const nn::Matrix& inputs) {
  nn::Matrix d = raw_deltas(m, inputs);
  for (Eigen::Index c = 0; c < d.cols(); ++c) {
    const auto col = column(d, c);
    const auto p = project_to_ball(col, m.uncertainty());
    for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, c) = p[static_cast<std::size_t>(r)];
  }
  return d;
}

inline std::vector<double> propose_delta(const MaximizerNet& m, std::span<const double> x,
                                         const Decision& a) {
  if (static_cast<int>(x.size()) != m.dim() || static_cast<int>(a.size()) != m.dim())
    throw ConfigError("context/decision size does not match the maximizer");
  return column(propose_deltas(m, nn::Matrix(encode_maximizer_input(x, a))), 0);
}

inline std::vector<double> add(std::span<const double> x, std::span<const double> d) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
  return out;
}

class MaximizerEnsemble {
 public:
  MaximizerEnsemble() = default;
  MaximizerEnsemble(std::vector<MaximizerNet> members, UncertaintySet set)
      : members_(std::move(members)), set_(set) {
    if (members_.empty()) throw ConfigError("ensemble needs at least one member");
    for (const auto& m : members_)
      if (m.dim() != members_.front().dim()) throw ConfigError("ensemble members disagree on dim");
  }

  // One member per lambda, each with its own init seed.
  static MaximizerEnsemble make(int dim, const UncertaintySet& set, std::uint64_t seed,
                                const std::vector<double>& lambdas = {1.0, 1.0, 10.0, 10.0},
                                const std::vector<int>& hidden = {400, 400}) {
    std::vector<MaximizerNet> members;
    for (std::size_t i = 0; i < lambdas.size(); ++i)
      members.push_back(MaximizerNet::make(dim, set, lambdas[i], derive_seed(seed, 0xe45e, i), hidden));
    return {std::move(members), set};
  }

  std::size_t size() const { return members_.size(); }
  int dim() const { return members_.front().dim(); }
  const UncertaintySet& uncertainty() const { return set_; }
  const std::vector<MaximizerNet>& members() const { return members_; }
  std::vector<MaximizerNet>& members() { return members_; }

 private:
  std::vector<MaximizerNet> members_;
  UncertaintySet set_;
};

struct WorstCase {
  double cost = -std::numeric_limits<double>::infinity();
  std::vector<double> delta;
  std::size_t member = 0;
};

// One (context, decision, cost) triple to evaluate.
struct WorstCaseQuery {
  std::span<const double> context;
  const Decision* decision = nullptr;
  const CostFunction* cost = nullptr;
};

// g_i = f(x + delta_i, a) for every member; keeps the max, ties to the lowest
// member index. All queries go through each member as a single batch.
inline std::vector<WorstCase> ensemble_worst_case(const MaximizerEnsemble& ens,
                                                  std::span<const WorstCaseQuery> queries) {
  std::vector<WorstCase> out(queries.size());
  if (queries.empty()) return out;
  const auto dim = ens.dim();
  nn::Matrix inputs(2 * dim, static_cast<Eigen::Index>(queries.size()));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (static_cast<int>(queries[q].context.size()) != dim)
      throw ConfigError("query context has the wrong dimension");
    inputs.col(static_cast<Eigen::Index>(q)) =
        encode_maximizer_input(queries[q].context, *queries[q].decision);
  }
  std::vector<double> shifted(static_cast<std::size_t>(dim));
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const nn::Matrix deltas = propose_deltas(ens.members()[m], inputs);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto c = static_cast<Eigen::Index>(q);
      for (int i = 0; i < dim; ++i)
        shifted[static_cast<std::size_t>(i)] = queries[q].context[static_cast<std::size_t>(i)] + deltas(i, c);
      const double g = (*queries[q].cost)(shifted, *queries[q].decision);
      if (g > out[q].cost) {
        out[q].cost = g;
        out[q].delta = column(deltas, c);
        out[q].member = m;
      }
    }
  }
  return out;
}

inline WorstCase ensemble_worst_case(const MaximizerEnsemble& ens, std::span<const double> x,
                                     const Decision& a, const CostFunction& cost) {
  const WorstCaseQuery q{x, &a, &cost};
  return ensemble_worst_case(ens, std::span<const WorstCaseQuery>(&q, 1)).front();
}

// Same context, many candidate decisions.
inline std::vector<WorstCase> ensemble_worst_case(const MaximizerEnsemble& ens,
                                                  std::span<const double> x,
                                                  std::span<const Decision> candidates,
                                                  const CostFunction& cost) {
  std::vector<WorstCaseQuery> qs;
  qs.reserve(candidates.size());
  for (const auto& a : candidates) qs.push_back({x, &a, &cost});
  return ensemble_worst_case(ens, qs);
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

// Training pairs are drawn from contexts x decisions; costs[i] belongs to
// contexts[i].
struct MaximizerData {
  std::vector<std::vector<double>> contexts;
  std::vector<const CostFunction*> costs;
  std::vector<Decision> decisions;
};

struct MaximizerTrainConfig {
  int epochs = 20;
  std::size_t pairs_per_epoch = 0;  // 0: one pair per context
  int batch = 64;
  double lr = 1e-3;
  int decay_every = 20;
  double decay = 0.9;
  double clip_norm = 5.0;
  std::size_t gradient_probe_params = 12;
  std::uint64_t seed = 1;
};

struct MaximizerTrainLog {
  std::vector<double> step_loss;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_penalty;  // mean [|delta| - eps]^+ per epoch
  double gradient_check_error = 0.0;
  std::size_t rejected_steps = 0;
};

struct MaximizerBatchLoss {
  double loss = 0.0;
  double penalty = 0.0;    // mean [|delta| - eps]^+
  nn::Matrix output_grad;  // d(mean loss)/d(head output)
};

// Mean loss over a batch given the head outputs (tanh, before eps scaling).
inline MaximizerBatchLoss maximizer_batch_loss(const MaximizerNet& m, const nn::Matrix& head,
                                               const MaximizerData& data,
                                               std::span<const std::size_t> ctx_idx,
                                               std::span<const std::size_t> dec_idx) {
  const auto dim = static_cast<std::size_t>(m.dim());
  const auto b = ctx_idx.size();
  const double eps = m.uncertainty().epsilon();
  MaximizerBatchLoss out;
  out.output_grad = nn::Matrix::Zero(head.rows(), head.cols());
  std::vector<double> delta(dim);
  std::vector<double> shifted(dim);
  for (std::size_t s = 0; s < b; ++s) {
    const auto& x = data.contexts[ctx_idx[s]];
    const auto& a = data.decisions[dec_idx[s]];
    const auto& f = *data.costs[ctx_idx[s]];
    for (std::size_t i = 0; i < dim; ++i) {
      delta[i] = a[i] ? eps * head(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) : 0.0;
      shifted[i] = x[i] + delta[i];
    }
    const double excess = m.uncertainty().norm(delta) - eps;
    const double hinge = std::max(excess, 0.0);
    out.loss += -f(shifted, a) + m.lambda() * hinge;
    out.penalty += hinge;
    const auto grad_f = f.gradient(shifted, a);
    std::vector<double> grad_norm;
    if (excess > 0.0) grad_norm = m.uncertainty().norm_gradient(delta);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!a[i]) continue;
      double g = -grad_f[i];
      if (excess > 0.0) g += m.lambda() * grad_norm[i];
      out.output_grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) =
          eps * g / static_cast<double>(b);
    }
  }
  out.loss /= static_cast<double>(b);
  out.penalty /= static_cast<double>(b);
  return out;
}

inline nn::Matrix gather_inputs(const MaximizerData& data, std::span<const std::size_t> ctx_idx,
                                std::span<const std::size_t> dec_idx) {
  const auto dim = static_cast<Eigen::Index>(data.contexts.front().size());
  nn::Matrix inputs(2 * dim, static_cast<Eigen::Index>(ctx_idx.size()));
  for (std::size_t s = 0; s < ctx_idx.size(); ++s)
    inputs.col(static_cast<Eigen::Index>(s)) =
        encode_maximizer_input(data.contexts[ctx_idx[s]], data.decisions[dec_idx[s]]);
  return inputs;
}

// Analytic gradient of the mean loss vs. central differences on a random
// subset of parameters; returns the max relative error.
inline double maximizer_gradient_check(const MaximizerNet& m, const MaximizerData& data,
                                       std::span<const std::size_t> ctx_idx,
                                       std::span<const std::size_t> dec_idx, std::size_t probes,
                                       Rng& rng, double step = 1e-5) {
  const nn::Matrix inputs = gather_inputs(data, ctx_idx, dec_idx);
  auto [head, tape] = nn::forward(m.network(), inputs);
  const auto bl = maximizer_batch_loss(m, head, data, ctx_idx, dec_idx);
  const nn::Gradients g = nn::backward(m.network(), tape, bl.output_grad);
  MaximizerNet probe = m;
  auto loss_at = [&]() {
    return maximizer_batch_loss(probe, nn::predict(probe.network(), inputs), data, ctx_idx, dec_idx)
        .loss;
  };
  double worst = 0.0;
  const auto n = probe.network().parameter_count();
  for (std::size_t t = 0; t < probes; ++t) {
    const auto k = uniform_index(rng, n);
    double& p = probe.network().parameter(k);
    const double saved = p;
    p = saved + step;
    const double up = loss_at();
    p = saved - step;
    const double down = loss_at();
    p = saved;
    worst = std::max(worst, nn::relative_error(g.flat(k), (up - down) / (2.0 * step)));
  }
  return worst;
}

// Minibatch Adam on the penalized loss over random (context, decision) pairs.
inline MaximizerTrainLog train_maximizer(MaximizerNet& m, const MaximizerData& data,
                                         const MaximizerTrainConfig& cfg) {
  if (data.contexts.empty() || data.decisions.empty())
    throw ConfigError("maximizer training needs contexts and decisions");
  if (data.costs.size() != data.contexts.size())
    throw ConfigError("one cost function per context is required");
  MaximizerTrainLog log;
  Rng rng = make_rng(cfg.seed, 0x7a1);
  auto adam = nn::AdamState::for_network(m.network());
  const auto batch = static_cast<std::size_t>(std::max(cfg.batch, 1));
  const auto per_epoch = cfg.pairs_per_epoch ? cfg.pairs_per_epoch : data.contexts.size();
  const auto steps = std::max<std::size_t>(1, (per_epoch + batch - 1) / batch);
  std::vector<std::size_t> ci(batch);
  std::vector<std::size_t> di(batch);
  auto draw = [&]() {
    for (std::size_t s = 0; s < batch; ++s) {
      ci[s] = uniform_index(rng, data.contexts.size());
      di[s] = uniform_index(rng, data.decisions.size());
    }
  };

  if (cfg.gradient_probe_params > 0) {
    draw();
    log.gradient_check_error =
        maximizer_gradient_check(m, data, ci, di, cfg.gradient_probe_params, rng);
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nn::step_decay(cfg.lr, epoch, cfg.decay_every, cfg.decay);
    double epoch_loss = 0.0;
    double epoch_penalty = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      draw();
      const nn::Matrix inputs = gather_inputs(data, ci, di);
      auto [head, tape] = nn::forward(m.network(), inputs);
      const auto bl = maximizer_batch_loss(m, head, data, ci, di);
      if (!std::isfinite(bl.loss)) {
        std::ostringstream msg;
        msg << "maximizer loss became non-finite at epoch " << epoch << " step " << step
            << " (lambda=" << m.lambda() << ")";
        throw NumericError(msg.str());
      }
      nn::Gradients g = nn::backward(m.network(), tape, bl.output_grad);
      nn::clip_global_norm(g, cfg.clip_norm);
      if (!nn::adam_step(m.network(), g, adam, lr).applied) ++log.rejected_steps;
      log.step_loss.push_back(bl.loss);
      epoch_loss += bl.loss;
      epoch_penalty += bl.penalty;
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(steps));
    log.epoch_penalty.push_back(epoch_penalty / static_cast<double>(steps));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Checkpoints: ensemble.txt manifest plus one network file per member.
//
//   ensemble members=<N> p=<p> epsilon=<eps>
//   member file=member_<i>.txt lambda=<lambda>
// ---------------------------------------------------------------------------

inline void save_ensemble(const std::filesystem::path& dir, const MaximizerEnsemble& ens) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "ensemble.txt", std::ios::binary);
  if (!manifest) throw ConfigError("cannot write ensemble manifest in " + dir.string());
  manifest << "ensemble members=" << ens.size() << " p=" << format_real(ens.uncertainty().p())
           << " epsilon=" << format_real(ens.uncertainty().epsilon()) << '\n';
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const std::string file = "member_" + std::to_string(i) + ".txt";
    manifest << "member file=" << file << " lambda=" << format_real(ens.members()[i].lambda())
             << '\n';
    std::ofstream os(dir / file, std::ios::binary);
    nn::save_network(os, ens.members()[i].network());
  }
}

namespace detail {
inline std::string field(std::string_view line, std::string_view key) {
  for (auto tok : split(line, ' ')) {
    if (tok.substr(0, key.size()) == key && tok.size() > key.size() && tok[key.size()] == '=')
      return std::string(tok.substr(key.size() + 1));
  }
  throw FormatError("missing field '" + std::string(key) + "'");
}
}  // namespace detail

inline MaximizerEnsemble load_ensemble(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "ensemble.txt", std::ios::binary);
  if (!manifest) throw ConfigError("cannot open ensemble manifest in " + dir.string());
  std::string line;
  std::getline(manifest, line);
  const UncertaintySet set(parse_real(detail::field(line, "epsilon")),
                           parse_real(detail::field(line, "p")));
  const auto n = parse_int(detail::field(line, "members"));
  std::vector<MaximizerNet> members;
  for (long long i = 0; i < n; ++i) {
    if (!std::getline(manifest, line)) throw FormatError("ensemble manifest is truncated");
    std::ifstream is(dir / detail::field(line, "file"), std::ios::binary);
    if (!is) throw ConfigError("cannot open ensemble member file");
    members.emplace_back(nn::load_network(is), set, parse_real(detail::field(line, "lambda")));
  }
  return {std::move(members), set};
}

}  // namespace lrco
