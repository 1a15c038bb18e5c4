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
//  Vocabulary of the robust problem  min_a max_{|delta|_p <= eps} f(x + delta, a):
//  the uncertainty ball, the factorized discrete decision space, and the
//  projection / penalty / sampling / enumeration primitives over them.
//

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lrco/common.hpp"

namespace lrco {

// Context-error ball {delta : |delta|_p <= epsilon}. p may be +infinity.
class UncertaintySet {
 public:
  UncertaintySet() = default;
  UncertaintySet(double epsilon, double p = 2.0) : p_(p), epsilon_(epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
      throw ConfigError("uncertainty budget must be finite and >= 0");
    if (!(p >= 1.0)) throw ConfigError("norm order must be >= 1");
  }

  double p() const { return p_; }
  double epsilon() const { return epsilon_; }

  double norm(std::span<const double> v) const {
    if (std::isinf(p_)) {
      double m = 0.0;
      for (double x : v) m = std::max(m, std::abs(x));
      return m;
    }
    if (p_ == 2.0) {
      double s = 0.0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    }
    double s = 0.0;
    for (double x : v) s += std::pow(std::abs(x), p_);
    return std::pow(s, 1.0 / p_);
  }

  // d|v|_p / dv, zero at the origin.
  std::vector<double> norm_gradient(std::span<const double> v) const {
    std::vector<double> g(v.size(), 0.0);
    const double n = norm(v);
    if (n == 0.0) return g;
    if (std::isinf(p_)) {
      const auto it = std::max_element(v.begin(), v.end(),
                                       [](double a, double b) { return std::abs(a) < std::abs(b); });
      const auto i = static_cast<std::size_t>(it - v.begin());
      g[i] = *it > 0 ? 1.0 : -1.0;
      return g;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double s = v[i] > 0 ? 1.0 : (v[i] < 0 ? -1.0 : 0.0);
      g[i] = s * std::pow(std::abs(v[i]) / n, p_ - 1.0);
    }
    return g;
  }

  bool contains(std::span<const double> v, double rel_tol = 1e-12) const {
    return norm(v) <= epsilon_ * (1.0 + rel_tol);
  }

 private:
  double p_ = 2.0;
  double epsilon_ = 0.0;
};

// Scales delta back onto the ball when it lies outside; identity inside.
inline std::vector<double> project_to_ball(std::span<const double> delta,
                                           const UncertaintySet& set) {
  std::vector<double> out(delta.begin(), delta.end());
  const double n = set.norm(delta);
  if (n <= set.epsilon()) return out;
  const double scale = set.epsilon() / n;
  for (double& v : out) v *= scale;
  return out;
}

// lambda * max(|delta|_p - epsilon, 0)
inline double budget_penalty(std::span<const double> delta, const UncertaintySet& set,
                             double lambda) {
  if (lambda < 0.0) throw ConfigError("penalty weight must be >= 0");
  return lambda * std::max(set.norm(delta) - set.epsilon(), 0.0);
}

// D decision groups, group i taking values 0..group_sizes[i]-1.
class DecisionSpace {
 public:
  static constexpr std::uint64_t kEnumerationCap = std::uint64_t{1} << 24;

  explicit DecisionSpace(std::vector<int> group_sizes) : sizes_(std::move(group_sizes)) {
    if (sizes_.empty()) throw ConfigError("decision space needs at least one group");
    for (int s : sizes_)
      if (s < 1 || s > 255) throw ConfigError("group sizes must be in [1, 255]");
  }

  static DecisionSpace binary(int groups) {
    return DecisionSpace(std::vector<int>(static_cast<std::size_t>(groups), 2));
  }

  std::size_t group_count() const { return sizes_.size(); }
  int group_size(std::size_t i) const { return sizes_[i]; }
  const std::vector<int>& group_sizes() const { return sizes_; }
  bool is_binary() const {
    return std::all_of(sizes_.begin(), sizes_.end(), [](int s) { return s == 2; });
  }

  // Product of group sizes, saturating at UINT64_MAX.
  std::uint64_t size() const {
    std::uint64_t n = 1;
    for (int s : sizes_) {
      if (n > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(s))
        return std::numeric_limits<std::uint64_t>::max();
      n *= static_cast<std::uint64_t>(s);
    }
    return n;
  }

 private:
  std::vector<int> sizes_;
};

// One value per decision group. Ordered lexicographically by group values.
struct Decision {
  std::vector<std::uint8_t> values;

  Decision() = default;
  explicit Decision(std::size_t groups) : values(groups, 0) {}
  explicit Decision(std::vector<std::uint8_t> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  std::uint8_t operator[](std::size_t i) const { return values[i]; }
  std::uint8_t& operator[](std::size_t i) { return values[i]; }

  std::size_t active_count() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
  }

  std::vector<double> as_reals() const { return {values.begin(), values.end()}; }

  std::string to_string() const {
    std::string s;
    for (auto v : values) s += static_cast<char>('0' + v);
    return s;
  }

  static Decision from_string(std::string_view s) {
    Decision d(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < '0' || s[i] > '9') throw FormatError("bad decision string");
      d.values[i] = static_cast<std::uint8_t>(s[i] - '0');
    }
    return d;
  }

  bool valid_for(const DecisionSpace& space) const {
    if (values.size() != space.group_count()) return false;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] >= space.group_size(i)) return false;
    return true;
  }

  friend auto operator<=>(const Decision&, const Decision&) = default;
  friend bool operator==(const Decision&, const Decision&) = default;
};

// Per-group categorical distributions; entry [i][v] = p(a_i = v | x).
using GroupDistributions = std::vector<std::vector<double>>;

// Each binary group as the distribution {1 - p, p}.
inline GroupDistributions bernoulli_groups(std::span<const double> probs) {
  GroupDistributions g;
  g.reserve(probs.size());
  for (double p : probs) g.push_back({1.0 - p, p});
  return g;
}

inline void check_distributions(const GroupDistributions& groups, double tol = 1e-9) {
  for (const auto& g : groups) {
    double s = 0.0;
    for (double p : g) {
      if (!(p >= 0.0)) throw DomainError("negative or NaN group probability");
      s += p;
    }
    if (std::abs(s - 1.0) > tol) throw DomainError("group distribution does not sum to 1");
  }
}

// P(a | x) = prod_i p(a_i | x).
inline double factorized_probability(const GroupDistributions& groups, const Decision& d) {
  if (groups.size() != d.size()) throw ConfigError("decision and distribution group counts differ");
  double p = 1.0;
  for (std::size_t i = 0; i < groups.size(); ++i) p *= groups[i].at(d[i]);
  return p;
}

inline double factorized_log_probability(const GroupDistributions& groups, const Decision& d) {
  if (groups.size() != d.size()) throw ConfigError("decision and distribution group counts differ");
  double lp = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) lp += std::log(groups[i].at(d[i]));
  return lp;
}

// Groups drawn independently by inverse CDF on one uniform per group.
inline Decision sample_decision(const GroupDistributions& groups, Rng& rng) {
  Decision d(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t v = g.size() - 1;
    for (std::size_t k = 0; k < g.size(); ++k) {
      acc += g[k];
      if (u < acc) {
        v = k;
        break;
      }
    }
    // zero-mass tail values are never chosen by the fallthrough
    while (v > 0 && g[v] == 0.0) --v;
    d[i] = static_cast<std::uint8_t>(v);
  }
  return d;
}

// Binary-group fast path: a_i = 1 with probability probs[i].
inline Decision sample_bernoulli(std::span<const double> probs, Rng& rng) {
  Decision d(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) d[i] = uniform01(rng) < probs[i] ? 1 : 0;
  return d;
}

// Keeps the `budget` candidates with the highest factorized probability.
// Ties keep the lexicographically smaller decision.
inline std::vector<Decision> keep_most_probable(std::vector<Decision> candidates,
                                                const GroupDistributions& groups,
                                                std::size_t budget) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::stable_sort(candidates.begin(), candidates.end(), [&](const Decision& a, const Decision& b) {
    return factorized_probability(groups, a) > factorized_probability(groups, b);
  });
  if (candidates.size() > budget) candidates.resize(budget);
  return candidates;
}

// Lexicographic walk over every decision of a space (last group fastest).
class DecisionEnumerator {
 public:
  explicit DecisionEnumerator(const DecisionSpace& space) : space_(space) {
    if (space.size() > DecisionSpace::kEnumerationCap)
      throw CapacityError("decision space has more than 2^24 decisions");
    current_ = Decision(space.group_count());
  }

  // Advances to the next decision; the first call yields all zeros.
  bool next() {
    if (!started_) {
      started_ = true;
      return true;
    }
    for (std::size_t i = current_.size(); i-- > 0;) {
      if (current_[i] + 1 < space_.group_size(i)) {
        ++current_[i];
        return true;
      }
      current_[i] = 0;
    }
    return false;
  }

  const Decision& current() const { return current_; }

 private:
  DecisionSpace space_;
  Decision current_;
  bool started_ = false;
};

template <class Fn>
void for_each_decision(const DecisionSpace& space, Fn&& fn) {
  DecisionEnumerator e(space);
  while (e.next()) fn(e.current());
}

inline std::vector<Decision> enumerate_decisions(const DecisionSpace& space) {
  std::vector<Decision> out;
  out.reserve(static_cast<std::size_t>(space.size()));
  for_each_decision(space, [&](const Decision& d) { out.push_back(d); });
  return out;
}

// Cost f(context, decision) together with its gradient in the context.
struct CostFunction {
  std::function<double(std::span<const double>, const Decision&)> value;
  std::function<std::vector<double>(std::span<const double>, const Decision&)> gradient;

  double operator()(std::span<const double> ctx, const Decision& a) const { return value(ctx, a); }
};

}  // namespace lrco
