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

#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "lrco/baselines.hpp"

namespace lrco {
namespace {

struct Small {
  std::vector<double> x;
  std::vector<double> eta;
};

Small random_small(Rng& rng, std::size_t n) {
  Small s;
  for (std::size_t k = 0; k < n; ++k) {
    s.x.push_back(uniform01(rng));
    s.eta.push_back(uniform(rng, 0.01, 0.05));
  }
  return s;
}

TEST(PolicyKind, NamesRoundTrip) {
  for (auto k : kAllPolicies) EXPECT_EQ(policy_from_string(to_string(k)), k);
  EXPECT_THROW(policy_from_string("best"), ConfigError);
}

TEST(Random, GroupFrequenciesAreUniform) {
  const DecisionSpace space({2, 3});
  Rng rng = make_rng(1);
  std::array<int, 3> counts{};
  int ones = 0;
  for (int t = 0; t < 30000; ++t) {
    const auto d = random_decision(space, rng);
    ones += d[0];
    ++counts[d[1]];
  }
  EXPECT_NEAR(ones / 30000.0, 0.5, 0.015);
  for (int c : counts) EXPECT_NEAR(c / 30000.0, 1.0 / 3.0, 0.015);
}

TEST(Greedy, HandExample) {
  const std::vector<double> x{0.9, 0.1};
  const std::vector<double> eta{0.05, 0.095};
  EXPECT_EQ(greedy_decision(x, eta, 1, 2).to_string(), "10");
}

TEST(Greedy, ProhibitiveCostsGiveNoOffloading) {
  const std::vector<double> x{0.9, 0.8, 0.7, 0.6};
  const std::vector<double> eta(4, 1.5);
  EXPECT_EQ(greedy_decision(x, eta, 2, 2).active_count(), 0u);
}

TEST(Greedy, CoversEveryService) {
  Rng rng = make_rng(2);
  for (int t = 0; t < 50; ++t) {
    auto s = random_small(rng, 20);
    for (double& v : s.x) v = uniform(rng, 0.5, 1.0);
    const auto a = greedy_decision(s.x, s.eta, 4, 5);
    EXPECT_GT(vec::utility(s.x, a, s.eta, 4, 5), 0.0);
  }
}

TEST(Greedy, NeverBeatsExhaustiveSearch) {
  Rng rng = make_rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto s = random_small(rng, 6);
    const double g = vec::utility(s.x, greedy_decision(s.x, s.eta, 2, 3), s.eta, 2, 3);
    EXPECT_LE(g, exhaustive_best(s.x, s.eta, 2, 3).utility + 1e-15);
  }
}

TEST(Exhaustive, MatchesIndependentEnumeration) {
  Rng rng = make_rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_small(rng, 6);
    double best = -1e9;
    int best_mask = -1;
    for (int mask = 0; mask < 64; ++mask) {
      double p = 1.0;
      double cost = 0.0;
      for (int j = 0; j < 2; ++j) {
        double fail = 1.0;
        for (int i = 0; i < 3; ++i) {
          const int k = j * 3 + i;
          if (mask >> (5 - k) & 1) {
            fail *= 1.0 - s.x[static_cast<std::size_t>(k)];
            cost += s.eta[static_cast<std::size_t>(k)];
          }
        }
        p *= 1.0 - fail;
      }
      if (p - cost > best) {
        best = p - cost;
        best_mask = mask;
      }
    }
    const auto r = exhaustive_best(s.x, s.eta, 2, 3);
    EXPECT_NEAR(r.utility, best, 1e-12);
    for (int k = 0; k < 6; ++k) EXPECT_EQ(r.decision[static_cast<std::size_t>(k)], (best_mask >> (5 - k)) & 1);
  }
}

TEST(Oracles, UsePredictedAndTrueRates) {
  vec::ProblemInstance inst;
  inst.services = 1;
  inst.clouds = 2;
  inst.x_pred = {0.9, 0.1};
  inst.x_true = {0.1, 0.9};
  inst.eta = {0.05, 0.05};
  EXPECT_EQ(weak_oracle(inst).to_string(), "10");
  EXPECT_EQ(oracle(inst).to_string(), "01");
}

TEST(Pga, MonotoneOneDimensionalClosedForm) {
  const std::vector<double> x{0.8};
  const std::vector<double> eta{0.05};
  const auto r = pga_worst_case(x, Decision::from_string("1"), eta, 1, 1, UncertaintySet(0.27));
  EXPECT_NEAR(r.utility, 0.48, 1e-12);
  EXPECT_NEAR(r.delta[0], -0.27, 1e-12);
}

TEST(Pga, InactiveDecisionIsUnaffected) {
  const std::vector<double> x{0.8, 0.3};
  const std::vector<double> eta{0.05, 0.05};
  const auto r = pga_worst_case(x, Decision::from_string("00"), eta, 1, 2, UncertaintySet(0.5));
  EXPECT_EQ(r.utility, 0.0);
  EXPECT_EQ(r.delta, (std::vector<double>{0.0, 0.0}));
}

TEST(Pga, ZeroBudgetIsNominal) {
  Rng rng = make_rng(5);
  const auto s = random_small(rng, 6);
  const auto a = Decision::from_string("101011");
  EXPECT_EQ(pga_worst_case(s.x, a, s.eta, 2, 3, UncertaintySet(0.0)).utility,
            vec::utility(s.x, a, s.eta, 2, 3));
}

TEST(Pga, FeasibleAndNoBetterThanNominal) {
  Rng rng = make_rng(6);
  const UncertaintySet set(0.4);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_small(rng, 20);
    const auto a = sample_bernoulli(std::vector<double>(20, 0.5), rng);
    const auto r = pga_worst_case(s.x, a, s.eta, 4, 5, set);
    EXPECT_TRUE(set.contains(r.delta));
    EXPECT_LE(r.utility, vec::utility(s.x, a, s.eta, 4, 5));
    for (std::size_t k = 0; k < 20; ++k) {
      EXPECT_GE(s.x[k] + r.delta[k], 0.0);
      EXPECT_LE(s.x[k] + r.delta[k], 1.0);
      if (!a[k]) EXPECT_EQ(r.delta[k], 0.0);
    }
    std::vector<double> shifted(20);
    for (std::size_t k = 0; k < 20; ++k) shifted[k] = s.x[k] + r.delta[k];
    EXPECT_NEAR(vec::utility(shifted, a, s.eta, 4, 5), r.utility, 1e-12);
  }
}

TEST(Pga, MoreStartsNeverWorse) {
  Rng rng = make_rng(7);
  const UncertaintySet set(0.6);
  PgaConfig few;
  few.starts = 2;
  PgaConfig many;
  many.starts = 16;
  for (int t = 0; t < 30; ++t) {
    const auto s = random_small(rng, 20);
    const auto a = sample_bernoulli(std::vector<double>(20, 0.6), rng);
    EXPECT_LE(pga_worst_case(s.x, a, s.eta, 4, 5, set, many).utility,
              pga_worst_case(s.x, a, s.eta, 4, 5, set, few).utility);
  }
}

TEST(Pga, SingleServiceCanBeZeroedWhenTheBudgetAllows) {
  // |x_active|_2 < epsilon: the adversary removes every replica of service 0.
  const std::vector<double> x{0.3, 0.4, 0.9, 0.9};
  const std::vector<double> eta{0.01, 0.01, 0.01, 0.01};
  const auto r = pga_worst_case(x, Decision::from_string("1111"), eta, 2, 2, UncertaintySet(0.55));
  EXPECT_NEAR(r.utility, -0.04, 1e-3);
}

TEST(RobustOracle, ZeroBudgetEqualsWeakOracle) {
  Rng rng = make_rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto s = random_small(rng, 6);
    const auto r = robust_oracle_small(s.x, s.eta, 2, 3, UncertaintySet(0.0));
    const auto e = exhaustive_best(s.x, s.eta, 2, 3);
    EXPECT_EQ(r.decision, e.decision);
    EXPECT_NEAR(r.worst_case_utility, e.utility, 1e-15);
  }
}

TEST(RobustOracle, DominatesEveryDecision) {
  Rng rng = make_rng(9);
  const UncertaintySet set(0.3);
  PgaConfig cfg;
  cfg.steps = 60;
  const auto s = random_small(rng, 6);
  const auto r = robust_oracle_small(s.x, s.eta, 2, 3, set, cfg);
  for (const auto& a : enumerate_decisions(DecisionSpace::binary(6)))
    EXPECT_LE(pga_worst_case(s.x, a, s.eta, 2, 3, set, cfg).utility, r.worst_case_utility);
}

TEST(RobustOracle, CapacityLimit) {
  const std::vector<double> x(20, 0.5);
  EXPECT_THROW(robust_oracle_small(x, x, 4, 5, UncertaintySet(0.1)), CapacityError);
}

}  // namespace
}  // namespace lrco
