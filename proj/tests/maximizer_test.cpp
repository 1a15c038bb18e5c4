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

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "lrco/baselines.hpp"
#include "lrco/maximizer.hpp"
#include "lrco/vec_env.hpp"

namespace lrco {
namespace {

std::vector<double> random_context(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = uniform01(rng);
  return x;
}

Decision random_bits(Rng& rng, std::size_t n) {
  Decision a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = uniform01(rng) < 0.5;
  return a;
}

// f(x + delta, a) = sum_i (x_i + delta_i) a_i.
CostFunction linear_cost() {
  CostFunction f;
  f.value = [](std::span<const double> x, const Decision& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * a[i];
    return s;
  };
  f.gradient = [](std::span<const double> x, const Decision& a) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = a[i];
    return g;
  };
  return f;
}

TEST(Proposal, AllZeroDecisionGivesZeroDelta) {
  const auto m = MaximizerNet::make(6, UncertaintySet(0.4), 1.0, 1, {32, 32});
  Rng rng = make_rng(50);
  const auto d = propose_delta(m, random_context(rng, 6), Decision(6));
  for (double v : d) EXPECT_EQ(v, 0.0);
}

TEST(Proposal, ZeroInitialisedHeadGivesZeroDelta) {
  const auto m = MaximizerNet::make(6, UncertaintySet(0.4), 1.0, 1, {32, 32}, nn::Init::zero);
  Rng rng = make_rng(51);
  for (int t = 0; t < 20; ++t)
    for (double v : propose_delta(m, random_context(rng, 6), random_bits(rng, 6))) EXPECT_EQ(v, 0.0);
}

TEST(Proposal, MaskedAndInsideTheBall) {
  for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
    const UncertaintySet set(0.3, p);
    const auto m = MaximizerNet::make(20, set, 1.0, 2, {64, 64});
    Rng rng = make_rng(52);
    nn::Matrix inputs(40, 500);
    std::vector<Decision> decisions;
    for (int c = 0; c < 500; ++c) {
      decisions.push_back(random_bits(rng, 20));
      inputs.col(c) = encode_maximizer_input(random_context(rng, 20), decisions.back());
    }
    const nn::Matrix d = propose_deltas(m, inputs);
    for (int c = 0; c < 500; ++c) {
      const auto col = column(d, c);
      EXPECT_TRUE(set.contains(col));
      for (int i = 0; i < 20; ++i)
        if (!decisions[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)]) EXPECT_EQ(col[static_cast<std::size_t>(i)], 0.0);
    }
  }
}

TEST(Proposal, DimensionMismatch) {
  const auto m = MaximizerNet::make(4, UncertaintySet(0.4), 1.0, 1, {8});
  EXPECT_THROW(propose_delta(m, std::vector<double>(5, 0.1), Decision(4)), ConfigError);
  EXPECT_THROW(MaximizerNet::make(4, UncertaintySet(0.4), -1.0, 1, {8}), ConfigError);
}

TEST(Ensemble, SingleMemberEqualsDirectEvaluation) {
  const UncertaintySet set(0.5);
  const auto ens = MaximizerEnsemble::make(5, set, 3, {1.0}, {16});
  const auto f = linear_cost();
  Rng rng = make_rng(53);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_context(rng, 5);
    const auto a = random_bits(rng, 5);
    const auto wc = ensemble_worst_case(ens, x, a, f);
    const auto d = propose_delta(ens.members()[0], x, a);
    EXPECT_DOUBLE_EQ(wc.cost, f(add(x, d), a));
    EXPECT_EQ(wc.member, 0u);
  }
}

TEST(Ensemble, MaxOverMembersAndMonotoneInMembers) {
  const UncertaintySet set(0.5);
  const auto full = MaximizerEnsemble::make(5, set, 4, {1.0, 1.0, 10.0, 10.0}, {16});
  const auto f = linear_cost();
  Rng rng = make_rng(54);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_context(rng, 5);
    const auto a = random_bits(rng, 5);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n <= full.size(); ++n) {
      std::vector<MaximizerNet> first(full.members().begin(), full.members().begin() + static_cast<long>(n));
      const MaximizerEnsemble sub(first, set);
      const auto wc = ensemble_worst_case(sub, x, a, f);
      EXPECT_GE(wc.cost, prev);
      prev = wc.cost;
      for (const auto& m : sub.members()) EXPECT_GE(wc.cost, f(add(x, propose_delta(m, x, a)), a));
    }
  }
}

TEST(Ensemble, TiesGoToLowestMember) {
  const UncertaintySet set(0.5);
  const auto zero = MaximizerNet::make(3, set, 1.0, 9, {8}, nn::Init::zero);
  const MaximizerEnsemble ens({zero, zero, zero}, set);
  const auto wc = ensemble_worst_case(ens, std::vector<double>{0.2, 0.3, 0.4},
                                      Decision::from_string("101"), linear_cost());
  EXPECT_EQ(wc.member, 0u);
}

TEST(Ensemble, BatchMatchesSingleQueries) {
  const auto ens = MaximizerEnsemble::make(6, UncertaintySet(0.3), 5, {1.0, 10.0}, {16});
  const auto f = vec::negative_utility_cost(std::vector<double>(6, 0.02), 2, 3);
  Rng rng = make_rng(55);
  const auto x = random_context(rng, 6);
  std::vector<Decision> cands;
  for (int i = 0; i < 30; ++i) cands.push_back(random_bits(rng, 6));
  const auto batch = ensemble_worst_case(ens, x, cands, f);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto one = ensemble_worst_case(ens, x, cands[i], f);
    EXPECT_NEAR(batch[i].cost, one.cost, 1e-12);
  }
}

TEST(Training, GradientMatchesFiniteDifferences) {
  const UncertaintySet set(0.6);
  for (double lambda : {1.0, 10.0}) {
    // Untrained head plus a large epsilon keeps some proposals outside the
    // ball so the hinge term is exercised.
    auto m = MaximizerNet::make(6, set, lambda, 6, {24, 24});
    Rng rng = make_rng(56);
    std::vector<double> eta(6, 0.03);
    const auto cost = vec::negative_utility_cost(eta, 2, 3);
    MaximizerData data;
    for (int i = 0; i < 16; ++i) data.contexts.push_back(random_context(rng, 6));
    for (int i = 0; i < 16; ++i) data.costs.push_back(&cost);
    for (int i = 0; i < 16; ++i) data.decisions.push_back(random_bits(rng, 6));
    std::vector<std::size_t> ci(16), di(16);
    for (std::size_t i = 0; i < 16; ++i) ci[i] = di[i] = i;
    EXPECT_LT(maximizer_gradient_check(m, data, ci, di, 200, rng), 1e-4) << lambda;
  }
}

TEST(Training, OneDimensionalLinearCostPushesToBoundary) {
  const UncertaintySet set(0.5);
  auto m = MaximizerNet::make(1, set, 1.0, 7, {16, 16});
  const auto f = linear_cost();
  MaximizerData data;
  Rng rng = make_rng(57);
  for (int i = 0; i < 64; ++i) data.contexts.push_back({uniform01(rng)});
  for (int i = 0; i < 64; ++i) data.costs.push_back(&f);
  data.decisions = {Decision::from_string("1")};
  MaximizerTrainConfig cfg;
  cfg.epochs = 150;
  cfg.lr = 1e-2;
  train_maximizer(m, data, cfg);
  for (double x : {0.1, 0.5, 0.9}) EXPECT_GT(propose_delta(m, std::vector<double>{x}, Decision::from_string("1"))[0], 0.49);
}

TEST(Training, NonFiniteLossAborts) {
  const UncertaintySet set(0.5);
  auto m = MaximizerNet::make(2, set, 1.0, 8, {4});
  CostFunction bad;
  bad.value = [](std::span<const double>, const Decision&) { return std::nan(""); };
  bad.gradient = [](std::span<const double> x, const Decision&) { return std::vector<double>(x.size(), 0.0); };
  MaximizerData data{{{0.5, 0.5}}, {&bad}, {Decision::from_string("11")}};
  EXPECT_THROW(train_maximizer(m, data, {}), NumericError);
}

// Shared fixture: one member trained on a small VEC problem.
class TrainedVec : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    vec::GenerationConfig g;
    g.services = 2;
    g.clouds = 3;
    g.rounds = 100;
    ds_ = new vec::Dataset(vec::generate_split("train", vec::kSplitTrain, 400, 58, g));
    set_ = UncertaintySet(0.3);
    costs_ = new std::vector<CostFunction>();
    for (const auto& inst : ds_->instances)
      costs_->push_back(vec::negative_utility_cost(inst.eta, 2, 3));
    MaximizerData data;
    for (std::size_t i = 0; i < 300; ++i) {
      data.contexts.push_back(ds_->instances[i].x_pred);
      data.costs.push_back(&(*costs_)[i]);
    }
    Rng rng = make_rng(59);
    for (int i = 0; i < 64; ++i) data.decisions.push_back(random_bits(rng, 6));
    net_ = new MaximizerNet(MaximizerNet::make(6, set_, 1.0, 60, {64, 64}));
    MaximizerTrainConfig cfg;
    cfg.epochs = 60;
    cfg.pairs_per_epoch = 4096;
    train_maximizer(*net_, data, cfg);
  }
  static void TearDownTestSuite() {
    delete ds_;
    delete costs_;
    delete net_;
  }
  static vec::Dataset* ds_;
  static std::vector<CostFunction>* costs_;
  static MaximizerNet* net_;
  static UncertaintySet set_;
};
vec::Dataset* TrainedVec::ds_ = nullptr;
std::vector<CostFunction>* TrainedVec::costs_ = nullptr;
MaximizerNet* TrainedVec::net_ = nullptr;
UncertaintySet TrainedVec::set_;

TEST_F(TrainedVec, HeldOutProposalsNearReferenceSolver) {
  Rng rng = make_rng(61);
  double learned = 0.0, reference = 0.0, penalty = 0.0;
  int at_least_nominal = 0, n = 0;
  for (std::size_t i = 300; i < 400; ++i) {
    const auto& inst = ds_->instances[i];
    const auto a = random_bits(rng, 6);
    const auto& f = (*costs_)[i];
    const nn::Matrix input(encode_maximizer_input(inst.x_pred, a));
    const auto raw = column(raw_deltas(*net_, input), 0);
    penalty += budget_penalty(raw, set_, 1.0);
    const double g = f(add(inst.x_pred, propose_delta(*net_, inst.x_pred, a)), a);
    learned += g;
    reference += -pga_worst_case(inst, a, set_).utility;
    at_least_nominal += g >= f(inst.x_pred, a) - 1e-12;
    ++n;
  }
  learned /= n;
  reference /= n;
  EXPECT_GE(learned, reference - 0.05 * std::abs(reference));
  EXPECT_LT(penalty / n, 0.05 * set_.epsilon());
  EXPECT_GE(at_least_nominal, 95);
}

TEST(Checkpoint, EnsembleRoundTrip) {
  const auto ens = MaximizerEnsemble::make(4, UncertaintySet(0.27, 2.0), 10, {1.0, 10.0}, {8});
  const auto dir = std::filesystem::temp_directory_path() / "lrco_ensemble_roundtrip";
  std::filesystem::remove_all(dir);
  save_ensemble(dir, ens);
  const auto back = load_ensemble(dir);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.uncertainty().epsilon(), 0.27);
  EXPECT_EQ(back.members()[1].lambda(), 10.0);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE(back.members()[i].network() == ens.members()[i].network());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace lrco
