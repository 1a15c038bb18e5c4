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

#include <sstream>

#include <gtest/gtest.h>

#include "lrco/eval.hpp"

namespace lrco::eval {
namespace {

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    for (auto c : split(line, ',')) cells.emplace_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

vec::Dataset small_test_set() {
  vec::GenerationConfig g;
  g.services = 2;
  g.clouds = 3;
  g.rounds = 100;
  return vec::generate_split("test", vec::kSplitTest, 25, 9, g);
}

TEST(Profiles, KnownNamesAndSizes) {
  EXPECT_EQ(profile_config("toy").data.services, 2);
  EXPECT_EQ(profile_config("desk").data.train, 3000u);
  EXPECT_EQ(profile_config("full").data.train, 15000u);
  EXPECT_THROW(profile_config("huge"), ConfigError);
}

TEST(ConfigFile, SectionsCommentsAndProfile) {
  std::istringstream is(
      "profile = toy   # start from the toy profile\n"
      "seed = 42\n"
      "[data]\n"
      "predictor = residual\n"
      "epsilon = 0.3\n"
      "[train]\n"
      "lambdas = 1, 10\n"
      "minimizer_hidden = 32,32\n"
      "gradient_form = probability\n"
      "[eval]\n"
      "policies = greedy, lrco\n");
  const auto c = parse_config(is);
  EXPECT_EQ(c.profile, "toy");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.data.services, 2);
  EXPECT_EQ(c.predictor, "residual");
  EXPECT_EQ(c.epsilon, 0.3);
  EXPECT_EQ(c.lrco.lambdas, (std::vector<double>{1.0, 10.0}));
  EXPECT_EQ(c.lrco.minimizer_hidden, (std::vector<int>{32, 32}));
  EXPECT_EQ(c.lrco.minimizer.form, PolicyGradientForm::probability);
  EXPECT_EQ(c.policies, (std::vector<PolicyKind>{PolicyKind::greedy, PolicyKind::lrco}));
}

TEST(ConfigFile, ExplicitProfileWins) {
  std::istringstream is("profile = toy\n");
  EXPECT_EQ(parse_config(is, "full").profile, "full");
}

TEST(ConfigFile, Errors) {
  std::istringstream unknown("[train]\nepochs = 3\n");
  EXPECT_THROW(parse_config(unknown), ConfigError);
  std::istringstream bad_value("seed = many\n");
  EXPECT_THROW(parse_config(bad_value), ConfigError);
  std::istringstream no_equals("[data]\ntrain 5\n");
  EXPECT_THROW(parse_config(no_equals), ConfigError);
  std::istringstream open_section("[data\n");
  EXPECT_THROW(parse_config(open_section), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/lrco.ini"), ConfigError);
}

TEST(ConfigFile, Validation) {
  auto c = profile_config("toy");
  EXPECT_NO_THROW(validate(c));
  c.predictor = "oracle";
  EXPECT_THROW(validate(c), ConfigError);
  c = profile_config("toy");
  c.epsilon = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
}

class Report : public ::testing::Test {
 protected:
  void SetUp() override {
    test_ = small_test_set();
    const std::vector<PolicyKind> kinds{PolicyKind::random, PolicyKind::greedy, PolicyKind::weak_oracle,
                                        PolicyKind::oracle};
    PgaConfig pga;
    pga.steps = 40;
    report_ = evaluate(test_, kinds, PolicyModels{}, UncertaintySet(0.2), pga);
  }
  vec::Dataset test_;
  EvalReport report_;
};

TEST_F(Report, SummaryIsTheMeanOfThePerInstanceFile) {
  std::ostringstream summary;
  std::ostringstream instances;
  write_summary(summary, report_);
  write_instances(instances, report_);
  const auto s = csv_rows(summary.str());
  const auto r = csv_rows(instances.str());
  ASSERT_EQ(s.size(), 5u);
  ASSERT_EQ(r.size(), 1u + 4u * 25u);
  EXPECT_EQ(s[0][0], "policy");
  for (std::size_t p = 1; p < s.size(); ++p) {
    double pred = 0.0, tru = 0.0, wc = 0.0;
    int n = 0;
    for (std::size_t i = 1; i < r.size(); ++i) {
      if (r[i][0] != s[p][0]) continue;
      pred += parse_real(r[i][3]);
      tru += parse_real(r[i][4]);
      wc += parse_real(r[i][5]);
      ++n;
    }
    ASSERT_EQ(n, 25);
    EXPECT_NEAR(parse_real(s[p][1]), pred / n, 1e-12);
    EXPECT_NEAR(parse_real(s[p][2]), tru / n, 1e-12);
    EXPECT_NEAR(parse_real(s[p][3]), wc / n, 1e-12);
  }
}

TEST_F(Report, OraclesDominateTheirObjective) {
  for (const auto& s : report_.summary) {
    EXPECT_LE(s.predicted, report_.of(PolicyKind::weak_oracle).predicted + 1e-15);
    EXPECT_LE(s.true_utility, report_.of(PolicyKind::oracle).true_utility + 1e-15);
    EXPECT_LE(s.worst_case, s.predicted + 1e-15);
  }
  EXPECT_THROW(report_.of(PolicyKind::lrco), ConfigError);
}

TEST_F(Report, CdfColumnsAreSortedWithUnitTop) {
  std::ostringstream os;
  write_cdf(os, report_);
  const auto rows = csv_rows(os.str());
  ASSERT_EQ(rows.size(), 26u);
  EXPECT_EQ(rows[0].size(), 1u + 4u * 3u);
  EXPECT_EQ(parse_real(rows.back()[0]), 1.0);
  for (std::size_t c = 0; c < rows[0].size(); ++c)
    for (std::size_t i = 2; i < rows.size(); ++i)
      EXPECT_LE(parse_real(rows[i - 1][c]), parse_real(rows[i][c]));
}

TEST_F(Report, LearnedPoliciesNeedModels) {
  EXPECT_THROW(decide(PolicyKind::lrco, test_.instances[0], PolicyModels{}), ConfigError);
  EXPECT_THROW(decide(PolicyKind::lco, test_.instances[0], PolicyModels{}), ConfigError);
}

TEST_F(Report, RandomPolicyIsReproducible) {
  PolicyModels m;
  m.seed = 5;
  for (const auto& inst : test_.instances)
    EXPECT_EQ(decide(PolicyKind::random, inst, m), decide(PolicyKind::random, inst, m));
}

TEST(Bench, TimesEveryPolicy) {
  const auto test = small_test_set();
  const std::vector<PolicyKind> kinds{PolicyKind::greedy, PolicyKind::oracle};
  const auto stats = bench_time(test.instances, kinds, PolicyModels{}, 2);
  ASSERT_EQ(stats.size(), 2u);
  for (const auto& s : stats) {
    EXPECT_EQ(s.pass_seconds.size(), 2u);
    EXPECT_GT(s.mean, 0.0);
  }
  std::ostringstream os;
  write_bench(os, stats, test.instances.size());
  EXPECT_EQ(csv_rows(os.str()).size(), 3u);
}

}  // namespace
}  // namespace lrco::eval
