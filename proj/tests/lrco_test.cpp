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

#include <filesystem>

#include <gtest/gtest.h>

#include "lrco/lrco.hpp"

namespace lrco {
namespace {

vec::Dataset toy_dataset(std::size_t n, std::uint64_t tag) {
  vec::GenerationConfig g;
  g.services = 2;
  g.clouds = 3;
  g.rounds = 100;
  return vec::generate_split("toy", tag, n, 5, g);
}

LrcoConfig tiny_config() {
  LrcoConfig c;
  c.max_iterate = 1;
  c.decision_set_size = 16;
  c.context_subsample = 64;
  c.maximizer_hidden = {16};
  c.minimizer_hidden = {16};
  c.pretrain.epochs = 2;
  c.retrain.epochs = 1;
  c.minimizer.epochs = 2;
  c.minimizer.batch = 16;
  c.candidates = 20;
  c.validation_contexts = 16;
  c.validation_candidates = 10;
  c.seed = 3;
  return c;
}

class Trained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new vec::Dataset(toy_dataset(96, 1));
    set_ = new RobustTrainingSet(make_training_set(*data_));
    log_ = new CoTrainingLog;
    model_ = new LrcoModel(iterative_train(*set_, UncertaintySet(0.2), tiny_config(), log_, set_));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete log_;
    delete set_;
    delete data_;
  }
  static vec::Dataset* data_;
  static RobustTrainingSet* set_;
  static CoTrainingLog* log_;
  static LrcoModel* model_;
};

vec::Dataset* Trained::data_ = nullptr;
RobustTrainingSet* Trained::set_ = nullptr;
CoTrainingLog* Trained::log_ = nullptr;
LrcoModel* Trained::model_ = nullptr;

TEST(TrainingSet, EncodesCenteredRatesAndCosts) {
  const auto ds = toy_dataset(4, 2);
  const auto set = make_training_set(ds);
  ASSERT_EQ(set.size(), 4u);
  EXPECT_EQ(set.dim(), 6);
  EXPECT_EQ(set.policy_inputs[1].size(), 12);
  EXPECT_EQ(set.policy_inputs[1](0), kRateInputScale * (ds.instances[1].x_pred[0] - 0.5));
  EXPECT_EQ(set.policy_inputs[1](6), kCostInputScale * (ds.instances[1].eta[0] - kCostInputCenter));
  EXPECT_THROW(make_training_set(vec::Dataset{}), ConfigError);
}

TEST(Candidates, SortedAndDistinct) {
  Rng rng = make_rng(4);
  const auto c = sample_candidates(std::vector<double>(4, 0.5), 200, rng);
  EXPECT_LE(c.size(), 16u);
  EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
  EXPECT_EQ(std::adjacent_find(c.begin(), c.end()), c.end());
}

TEST_F(Trained, LoopCountFollowsMaxIterate) {
  EXPECT_EQ(log_->minimizer_phases.size(), 2u);
  EXPECT_EQ(log_->ensemble_phases.size(), 2u);
  EXPECT_EQ(log_->decision_sets.size(), 2u);
  EXPECT_EQ(log_->marginal_entropy.size(), 2u);
  EXPECT_EQ(log_->validation_worst.size(), 2u);
  EXPECT_EQ(log_->ensemble_phases[0].size(), 4u);
}

TEST(IterativeTrain, MaxIterateZeroIsOnePass) {
  const auto ds = toy_dataset(32, 3);
  const auto set = make_training_set(ds);
  auto cfg = tiny_config();
  cfg.max_iterate = 0;
  CoTrainingLog log;
  iterative_train(set, UncertaintySet(0.2), cfg, &log);
  EXPECT_EQ(log.minimizer_phases.size(), 1u);
  EXPECT_EQ(log.ensemble_phases.size(), 1u);
  EXPECT_TRUE(log.validation_worst.empty());
}

TEST(IterativeTrain, ReproducibleUnderSeed) {
  const auto set = make_training_set(toy_dataset(32, 4));
  const auto a = iterative_train(set, UncertaintySet(0.2), tiny_config());
  const auto b = iterative_train(set, UncertaintySet(0.2), tiny_config());
  EXPECT_EQ(nn::to_text(a.policy.network()), nn::to_text(b.policy.network()));
  for (std::size_t m = 0; m < a.ensemble.size(); ++m)
    EXPECT_EQ(nn::to_text(a.ensemble.members()[m].network()),
              nn::to_text(b.ensemble.members()[m].network()));
}

TEST_F(Trained, MarginalIsThePerGroupMean) {
  const auto m = marginal_distribution(model_->policy, set_->policy_inputs);
  std::vector<double> direct(6, 0.0);
  for (const auto& in : set_->policy_inputs) {
    const auto p = decision_distribution(model_->policy, in);
    for (std::size_t g = 0; g < 6; ++g) direct[g] += p[g];
  }
  for (std::size_t g = 0; g < 6; ++g)
    EXPECT_NEAR(m[g], direct[g] / static_cast<double>(set_->size()), 1e-12);
}

TEST_F(Trained, SingleCandidateIsTheSampledDecision) {
  const auto& inst = data_->instances[0];
  const auto out = infer(*model_, inst, 11, 1);
  EXPECT_EQ(out.evaluated, 1u);
  Rng rng = make_rng(11, kInferenceStream, inst.id);
  const auto probs = decision_distribution(model_->policy, set_->policy_inputs[0]);
  const auto sampled = sample_bernoulli(probs, rng);
  EXPECT_EQ(out.decision, sampled);
  EXPECT_EQ(out.worst_cost, ensemble_worst_case(model_->ensemble, inst.x_pred, sampled, set_->costs[0]).cost);
}

TEST_F(Trained, ReturnsTheArgminCandidate) {
  for (std::size_t i = 0; i < 10; ++i) {
    Rng rng = make_rng(12, 0, i);
    Rng replay = make_rng(12, 0, i);
    const auto out = infer(*model_, set_->policy_inputs[i], set_->contexts[i], set_->costs[i], 50, rng);
    const auto candidates =
        sample_candidates(decision_distribution(model_->policy, set_->policy_inputs[i]), 50, replay);
    ASSERT_EQ(candidates.size(), out.evaluated);
    for (const auto& c : candidates)
      EXPECT_LE(out.worst_cost, ensemble_worst_case(model_->ensemble, set_->contexts[i], c, set_->costs[i]).cost);
  }
}

TEST_F(Trained, MoreNestedCandidatesNeverHurt) {
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& inst = data_->instances[i];
    double prev = std::numeric_limits<double>::infinity();
    for (int k : {1, 10, 100}) {
      const double g = infer(*model_, inst, 13, k).worst_cost;
      EXPECT_LE(g, prev);
      prev = g;
    }
  }
}

TEST_F(Trained, DeterministicPolicyIgnoresK) {
  LrcoModel m = *model_;
  auto& head = m.policy.network().layers().back();
  head.weights().setZero();
  head.bias() << 40.0, -40.0, 40.0, -40.0, -40.0, 40.0;
  const auto& inst = data_->instances[3];
  for (int k : {1, 7, 300}) {
    const auto out = infer(m, inst, 14, k);
    EXPECT_EQ(out.decision.to_string(), "101001");
    EXPECT_EQ(out.evaluated, 1u);
  }
}

TEST_F(Trained, BundleRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "lrco_bundle_test";
  std::filesystem::remove_all(dir);
  save_model(dir, *model_, describe(tiny_config()));
  const auto loaded = load_model(dir);
  EXPECT_EQ(loaded.policy.network(), model_->policy.network());
  EXPECT_EQ(loaded.uncertainty.epsilon(), 0.2);
  EXPECT_EQ(loaded.candidates, model_->candidates);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto a = infer(*model_, data_->instances[i], 15);
    const auto b = infer(loaded, data_->instances[i], 15);
    EXPECT_EQ(a.decision, b.decision);
    EXPECT_EQ(a.worst_cost, b.worst_cost);
  }
  EXPECT_THROW(load_lco(dir), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Lco, SamePhasesAsCoTraining) {
  const auto set = make_training_set(toy_dataset(32, 5));
  std::vector<MinimizerTrainLog> logs;
  const auto policy = train_lco(set, tiny_config(), &logs);
  EXPECT_EQ(logs.size(), 2u);
  EXPECT_EQ(policy.groups(), 6);
}

TEST(Lco, PicksTheBestNominalCandidate) {
  const auto ds = toy_dataset(8, 6);
  const auto set = make_training_set(ds);
  const auto policy = MinimizerPolicy::make(12, 6, 16, {8});
  for (std::size_t i = 0; i < 8; ++i) {
    const auto out = lco_infer(policy, ds.instances[i], 40, 17);
    Rng rng = make_rng(17, kInferenceStream, ds.instances[i].id);
    for (const auto& c : sample_candidates(decision_distribution(policy, set.policy_inputs[i]), 40, rng))
      EXPECT_LE(out.worst_cost, set.costs[i](set.contexts[i], c));
  }
}

TEST(Bundle, ManifestRoundTripAndHash) {
  const auto path = std::filesystem::temp_directory_path() / "lrco_manifest_test.txt";
  const Manifest m{{"a", "1"}, {"b", "x=y"}};
  write_manifest(path, m);
  EXPECT_EQ(read_manifest(path), m);
  std::filesystem::remove(path);
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(dataset_hash(toy_dataset(3, 7)), dataset_hash(toy_dataset(3, 7)));
  EXPECT_NE(dataset_hash(toy_dataset(3, 7)), dataset_hash(toy_dataset(3, 8)));
}

}  // namespace
}  // namespace lrco
