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
//  Comparison policies for the offloading problem and the reference
//  worst-case machinery used to score every policy:
//
//    random, greedy        uncertainty-oblivious heuristics
//    weak oracle, oracle   exhaustive search on predicted / true rates
//    pga_worst_case        multi-start projected gradient over the ball
//    robust_oracle_small   exhaustive search of pga worst cases (tiny spaces)
//

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lrco/common.hpp"
#include "lrco/problem.hpp"
#include "lrco/vec_env.hpp"

namespace lrco {

enum class PolicyKind { random, greedy, lco, weak_oracle, oracle, lrco };

inline constexpr PolicyKind kAllPolicies[] = {PolicyKind::random,      PolicyKind::greedy,
                                              PolicyKind::lco,         PolicyKind::weak_oracle,
                                              PolicyKind::oracle,      PolicyKind::lrco};

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::random: return "random";
    case PolicyKind::greedy: return "greedy";
    case PolicyKind::lco: return "lco";
    case PolicyKind::weak_oracle: return "weak_oracle";
    case PolicyKind::oracle: return "oracle";
    case PolicyKind::lrco: return "lrco";
  }
  return "?";
}

inline PolicyKind policy_from_string(std::string_view s) {
  for (auto k : kAllPolicies)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

inline Decision random_decision(const DecisionSpace& space, Rng& rng) {
  Decision d(space.group_count());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<std::uint8_t>(uniform_index(rng, static_cast<std::size_t>(space.group_size(i))));
  return d;
}

// Greedy on the predicted rates, starting from all zeros.
//
// While some micro service has no replica, P = 0 and no single flip can raise
// the utility, so the first phase ranks flips by (services covered, product of
// covered services' success minus cost) and only takes flips that add
// coverage. Once every service is covered it takes the flip with the largest
// strictly positive utility gain until none is left. Ties go to the lowest
// flattened index. Returns all zeros when the result has negative utility.
inline Decision greedy_decision(std::span<const double> x, std::span<const double> eta, int services,
                                int clouds) {
  const auto n = static_cast<std::size_t>(services * clouds);
  Decision a(n);
  auto covered = [&](const Decision& d, int j) {
    for (int i = 0; i < clouds; ++i)
      if (d[static_cast<std::size_t>(j * clouds + i)]) return true;
    return false;
  };
  auto coverage = [&](const Decision& d) {
    int c = 0;
    for (int j = 0; j < services; ++j) c += covered(d, j) ? 1 : 0;
    return c;
  };
  auto partial_utility = [&](const Decision& d) {
    double p = 1.0;
    for (int j = 0; j < services; ++j) {
      if (!covered(d, j)) continue;
      double fail = 1.0;
      for (int i = 0; i < clouds; ++i) {
        const auto k = static_cast<std::size_t>(j * clouds + i);
        if (d[k]) fail *= 1.0 - vec::clamp01(x[k]);
      }
      p *= 1.0 - fail;
    }
    return p - vec::offloading_cost(eta, d);
  };

  while (coverage(a) < services) {
    const int base = coverage(a);
    std::size_t best = n;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (a[k]) continue;
      a[k] = 1;
      if (coverage(a) > base) {
        const double v = partial_utility(a);
        if (v > best_value) {
          best_value = v;
          best = k;
        }
      }
      a[k] = 0;
    }
    a[best] = 1;
  }
  while (true) {
    const double base = vec::utility(x, a, eta, services, clouds);
    std::size_t best = n;
    double best_gain = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (a[k]) continue;
      a[k] = 1;
      const double gain = vec::utility(x, a, eta, services, clouds) - base;
      a[k] = 0;
      if (gain > best_gain) {
        best_gain = gain;
        best = k;
      }
    }
    if (best == n) break;
    a[best] = 1;
  }
  if (vec::utility(x, a, eta, services, clouds) < 0.0) return Decision(n);
  return a;
}

struct SearchResult {
  Decision decision;
  double utility = -std::numeric_limits<double>::infinity();
};

// argmax_a U(x, a) by enumeration; ties keep the lexicographically smaller a.
inline SearchResult exhaustive_best(std::span<const double> x, std::span<const double> eta,
                                    int services, int clouds) {
  const auto space = DecisionSpace::binary(services * clouds);
  SearchResult best;
  for_each_decision(space, [&](const Decision& a) {
    const double u = vec::utility(x, a, eta, services, clouds);
    if (u > best.utility) {
      best.utility = u;
      best.decision = a;
    }
  });
  return best;
}

// Exhaustive search on the predicted rates.
inline Decision weak_oracle(const vec::ProblemInstance& inst) {
  return exhaustive_best(inst.x_pred, inst.eta, inst.services, inst.clouds).decision;
}

// Exhaustive search on the true rates.
inline Decision oracle(const vec::ProblemInstance& inst) {
  return exhaustive_best(inst.x_true, inst.eta, inst.services, inst.clouds).decision;
}

struct PgaConfig {
  int starts = 8;
  int steps = 200;
  double step_scale = 0.05;  // step size = step_scale * epsilon
  std::uint64_t seed = 0x9a;
};

struct PgaResult {
  double utility = std::numeric_limits<double>::infinity();
  std::vector<double> delta;
};

// min_{delta in ball} U(x + delta, a) by projected gradient descent from
// several starts: delta = 0, then uniform points on the sphere restricted to
// the decision's active coordinates. After each step delta is projected onto
// the ball and then clipped so that x + delta stays in [0, 1]; the clip only
// shrinks |delta|, so iterates stay feasible. Start s depends only on
// (seed, s), so more starts never give a worse answer.
inline PgaResult pga_worst_case(std::span<const double> x, const Decision& a,
                                std::span<const double> eta, int services, int clouds,
                                const UncertaintySet& set, const PgaConfig& cfg = {}) {
  const auto n = x.size();
  PgaResult best;
  best.delta.assign(n, 0.0);
  best.utility = vec::utility(x, a, eta, services, clouds);
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < n; ++k)
    if (a[k]) active.push_back(k);
  if (active.empty() || set.epsilon() == 0.0) return best;

  const double step = cfg.step_scale * set.epsilon();
  std::vector<double> delta(n);
  std::vector<double> shifted(n);
  auto clip_box = [&](std::vector<double>& d) {
    for (std::size_t k = 0; k < n; ++k) d[k] = std::clamp(d[k], -x[k], 1.0 - x[k]);
  };
  auto evaluate = [&](const std::vector<double>& d) {
    for (std::size_t k = 0; k < n; ++k) shifted[k] = x[k] + d[k];
    const double u = vec::utility(shifted, a, eta, services, clouds);
    if (u < best.utility) {
      best.utility = u;
      best.delta = d;
    }
  };

  for (int s = 0; s < cfg.starts; ++s) {
    std::fill(delta.begin(), delta.end(), 0.0);
    if (s > 0) {
      Rng rng = make_rng(cfg.seed, 0x57a27, static_cast<std::uint64_t>(s));
      for (auto k : active) delta[k] = standard_normal(rng);
      const double nrm = set.norm(delta);
      if (nrm > 0.0)
        for (auto k : active) delta[k] *= set.epsilon() / nrm;
      clip_box(delta);
    }
    evaluate(delta);
    for (int t = 0; t < cfg.steps; ++t) {
      for (std::size_t k = 0; k < n; ++k) shifted[k] = x[k] + delta[k];
      const auto g = vec::utility_gradient_in_x(shifted, a, services, clouds);
      for (auto k : active) delta[k] -= step * g[k];
      delta = project_to_ball(delta, set);
      clip_box(delta);
      evaluate(delta);
    }
  }
  return best;
}

inline PgaResult pga_worst_case(const vec::ProblemInstance& inst, const Decision& a,
                                const UncertaintySet& set, const PgaConfig& cfg = {}) {
  return pga_worst_case(inst.x_pred, a, inst.eta, inst.services, inst.clouds, set, cfg);
}

struct RobustOptimum {
  Decision decision;
  double worst_case_utility = -std::numeric_limits<double>::infinity();
};

// argmax_a min_delta U(x + delta, a) with the pga inner solver, for spaces of
// at most 4096 decisions. Ties keep the lexicographically smaller decision.
inline RobustOptimum robust_oracle_small(std::span<const double> x, std::span<const double> eta,
                                         int services, int clouds, const UncertaintySet& set,
                                         const PgaConfig& cfg = {}) {
  const auto space = DecisionSpace::binary(services * clouds);
  if (space.size() > 4096) throw CapacityError("robust oracle is limited to 4096 decisions");
  RobustOptimum best;
  for_each_decision(space, [&](const Decision& a) {
    const double u = pga_worst_case(x, a, eta, services, clouds, set, cfg).utility;
    if (u > best.worst_case_utility) {
      best.worst_case_utility = u;
      best.decision = a;
    }
  });
  return best;
}

}  // namespace lrco
