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

// Command line front end: gen-data, fit-predictors, train, eval, bench-time
// and sweep over one run directory.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lrco/eval.hpp"

namespace {

using lrco::eval::RunConfig;

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::optional<std::string> profile;
  std::optional<std::string> predictor;
  std::optional<double> epsilon;
  std::optional<int> candidates;
  std::optional<std::string> policies;
};

RunConfig resolve(const GlobalFlags& g) {
  RunConfig cfg = g.config.empty() ? lrco::eval::profile_config(g.profile.value_or("desk"))
                                   : lrco::eval::load_config(g.config, g.profile);
  if (g.seed) cfg.seed = *g.seed;
  if (g.predictor) cfg.predictor = *g.predictor;
  if (g.epsilon) cfg.epsilon = *g.epsilon;
  if (g.candidates) cfg.lrco.candidates = *g.candidates;
  if (g.policies) lrco::eval::apply_setting(cfg, "eval.policies", *g.policies);
  lrco::eval::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning-based robust combinatorial optimization for task offloading"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "Configuration file ([section] key = value)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Run directory")->capture_default_str();
  app.add_option("--profile", g.profile, "Size profile")
      ->check(CLI::IsMember({"toy", "desk", "full"}));
  app.add_option("--predictor", g.predictor, "Context predictor to train and evaluate with")
      ->check(CLI::IsMember({"linear", "residual"}));
  app.add_option("--epsilon", g.epsilon, "Error budget override (default: predictor budget)");
  app.add_option("--candidates", g.candidates, "Candidates K sampled at inference");
  app.add_option("--policies", g.policies, "Comma-separated policies to evaluate");

  auto* gen = app.add_subcommand("gen-data", "Generate datasets, fit predictors, report error budgets");
  auto* fit = app.add_subcommand("fit-predictors", "Refit both predictors on existing raw data");
  auto* train = app.add_subcommand("train", "Train LRCO and LCO bundles");
  std::string which = "both";
  train->add_option("--policy", which, "Which model to train")
      ->check(CLI::IsMember({"both", "lrco", "lco"}))
      ->capture_default_str();
  auto* eval = app.add_subcommand("eval", "Evaluate policies on the test split");
  auto* bench = app.add_subcommand("bench-time", "Time decision making per policy");
  auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep");
  std::string axis;
  sweep->add_option("--axis", axis, "samples, hidden or ensemble")
      ->required()
      ->check(CLI::IsMember({"samples", "hidden", "ensemble"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig cfg = resolve(g);
    const lrco::eval::Paths paths{g.out};
    if (gen->parsed()) {
      lrco::eval::gen_data(cfg, paths);
    } else if (fit->parsed()) {
      lrco::eval::fit_predictors(cfg, paths);
    } else if (train->parsed()) {
      const auto target = which == "lrco"  ? lrco::eval::TrainTarget::lrco
                          : which == "lco" ? lrco::eval::TrainTarget::lco
                                           : lrco::eval::TrainTarget::both;
      lrco::eval::train(cfg, paths, target);
    } else if (eval->parsed()) {
      lrco::eval::run_eval(cfg, paths);
    } else if (bench->parsed()) {
      lrco::eval::run_bench(cfg, paths);
    } else if (sweep->parsed()) {
      lrco::eval::run_sweep(cfg, paths, lrco::eval::sweep_axis_from_string(axis));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
