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
//  Replicated task offloading in vehicular edge computing.
//
//  A task has M micro services; each may be replicated on up to C vehicular
//  clouds. Context vectors, decisions and costs are flattened service-major:
//  entry k = j * C + i is (service j, cloud i).
//
//  Success rates are simulated from a wireless transmission delay and an
//  M/M/1-fitted compute delay, then predicted from (distance, cpu, deadline)
//  by a linear model or a linear model plus a residual network.
//

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lrco/common.hpp"
#include "lrco/nn.hpp"
#include "lrco/problem.hpp"

namespace lrco::vec {

struct Feature {
  double distance = 0.0;      // RSU to vehicular cloud, meters
  double cpu = 0.0;           // CPU utilization of the cloud
  double deadline = 0.0;      // seconds
  double interference = 0.0;  // mean interference level of the link, dBm
};

struct ChannelParams {
  double data_bits = 3e6;
  double bandwidth_hz = 10e6;
  double tx_power_dbm = 10.0;
  double noise_dbm = -172.0;
  double path_loss_exponent = 1.8;
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

// S / (W log2(1 + P d^-alpha / (sigma^2 + I)))
inline double transmission_delay(double distance, double interference_dbm,
                                 const ChannelParams& ch = {}) {
  if (!(distance > 0.0)) throw DomainError("distance must be positive");
  if (!(ch.bandwidth_hz > 0.0)) throw DomainError("bandwidth must be positive");
  const double snr = dbm_to_watts(ch.tx_power_dbm) * std::pow(distance, -ch.path_loss_exponent) /
                     (dbm_to_watts(ch.noise_dbm) + dbm_to_watts(interference_dbm));
  const double rate = ch.bandwidth_hz * std::log2(1.0 + snr);
  if (!(rate > 0.0)) throw DomainError("non-positive channel rate");
  return ch.data_bits / rate;
}

inline double transmission_delay(const Feature& f, const ChannelParams& ch = {}) {
  return transmission_delay(f.distance, f.interference, ch);
}

inline constexpr double kQueueScale = 0.227;
inline constexpr double kQueuePole = 2.15;
inline constexpr double kQueueNoise = 0.007;

// 0.227 / (2.15 - cpu) + 0.007 z, floored at zero.
inline double compute_delay(double cpu, double z) {
  if (!(cpu < kQueuePole)) throw DomainError("cpu utilization at or beyond the queue pole 2.15");
  return std::max(kQueueScale / (kQueuePole - cpu) + kQueueNoise * z, 0.0);
}

inline double compute_delay(double cpu, Rng& rng) { return compute_delay(cpu, standard_normal(rng)); }

struct SimulationParams {
  ChannelParams channel{};
  double gps_error = 0.03;                   // relative distance jitter per round
  double interference_fluctuation_db = 8.5;  // per-round swing around the link mean
};

// Fraction of rounds in which transmission plus compute delay meets the
// deadline. Each round re-draws GPS jitter, interference and compute noise.
inline double simulate_success_rate(const Feature& f, int rounds, Rng& rng,
                                    const SimulationParams& sim = {}) {
  if (rounds < 1) throw ConfigError("simulation needs at least one round");
  int ok = 0;
  for (int r = 0; r < rounds; ++r) {
    const double d = f.distance * (1.0 + uniform(rng, -sim.gps_error, sim.gps_error));
    const double interference =
        f.interference +
        uniform(rng, -sim.interference_fluctuation_db, sim.interference_fluctuation_db);
    const double total = transmission_delay(d, interference, sim.channel) + compute_delay(f.cpu, rng);
    if (total <= f.deadline) ++ok;
  }
  return static_cast<double>(ok) / rounds;
}

struct FeatureSampling {
  double distance_min = 10.0;
  double distance_max = 100.0;
  double cpu_min = 0.1;
  double cpu_max = 0.9;
  std::vector<double> deadlines{0.25, 0.5, 0.75, 1.0};
  double interference_min = -24.0;
  double interference_max = -21.0;
  double eta_min = 0.01;
  double eta_max = 0.05;
};

inline Feature sample_feature(Rng& rng, const FeatureSampling& s = {}) {
  Feature f;
  f.distance = uniform(rng, s.distance_min, s.distance_max);
  f.cpu = uniform(rng, s.cpu_min, s.cpu_max);
  f.deadline = s.deadlines[uniform_index(rng, s.deadlines.size())];
  f.interference = uniform(rng, s.interference_min, s.interference_max);
  return f;
}

struct ProblemInstance {
  std::uint64_t id = 0;
  int services = 0;  // M
  int clouds = 0;    // C
  std::vector<Feature> features;
  std::vector<double> x_true;
  std::vector<double> x_pred;
  std::vector<double> eta;

  std::size_t dim() const { return static_cast<std::size_t>(services) * clouds; }
};

struct Dataset {
  std::uint64_t seed = 0;
  int services = 4;
  int clouds = 5;
  std::string split;
  std::string predictor = "none";
  std::vector<ProblemInstance> instances;

  std::size_t dim() const { return static_cast<std::size_t>(services) * clouds; }
};

struct GenerationConfig {
  int services = 4;
  int clouds = 5;
  int rounds = 1000;
  FeatureSampling sampling{};
  SimulationParams simulation{};
};

inline constexpr std::uint64_t kSplitTrain = 1;
inline constexpr std::uint64_t kSplitVal = 2;
inline constexpr std::uint64_t kSplitTest = 3;

// Instance `index` of split `tag` only depends on (seed, tag, index).
inline ProblemInstance generate_instance(std::uint64_t seed, std::uint64_t tag, std::uint64_t index,
                                         const GenerationConfig& cfg) {
  Rng rng = make_rng(seed, tag, index);
  ProblemInstance inst;
  inst.id = index;
  inst.services = cfg.services;
  inst.clouds = cfg.clouds;
  const auto n = inst.dim();
  inst.features.reserve(n);
  inst.x_true.reserve(n);
  inst.eta.reserve(n);
  for (std::size_t k = 0; k < n; ++k) inst.features.push_back(sample_feature(rng, cfg.sampling));
  for (std::size_t k = 0; k < n; ++k)
    inst.eta.push_back(uniform(rng, cfg.sampling.eta_min, cfg.sampling.eta_max));
  for (const auto& f : inst.features)
    inst.x_true.push_back(simulate_success_rate(f, cfg.rounds, rng, cfg.simulation));
  inst.x_pred = inst.x_true;
  return inst;
}

inline Dataset generate_split(std::string split, std::uint64_t tag, std::size_t n,
                              std::uint64_t seed, const GenerationConfig& cfg = {}) {
  if (n < 1) throw ConfigError("dataset split '" + split + "' must have at least one instance");
  Dataset ds;
  ds.seed = seed;
  ds.services = cfg.services;
  ds.clouds = cfg.clouds;
  ds.split = std::move(split);
  ds.instances.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.instances[i] = generate_instance(seed, tag, i, cfg);
  return ds;
}

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

inline DatasetSplits generate_dataset(std::size_t train_n, std::size_t val_n, std::size_t test_n,
                                      std::uint64_t seed, const GenerationConfig& cfg = {}) {
  return {generate_split("train", kSplitTrain, train_n, seed, cfg),
          generate_split("val", kSplitVal, val_n, seed, cfg),
          generate_split("test", kSplitTest, test_n, seed, cfg)};
}

// ---------------------------------------------------------------------------
// Dataset files.
//
//   #schema=lrco-vec-dataset/1 seed=<u64> split=<name> M=<M> C=<C> predictor=<name>
//   id,M,C,<M*C x (distance,cpu,deadline,interference)>,<M*C x_true>,<M*C x_pred>,<M*C eta>
// ---------------------------------------------------------------------------

inline constexpr const char* kDatasetSchema = "lrco-vec-dataset/1";

inline void write_dataset(std::ostream& os, const Dataset& ds) {
  os << "#schema=" << kDatasetSchema << " seed=" << ds.seed << " split=" << ds.split
     << " M=" << ds.services << " C=" << ds.clouds << " predictor=" << ds.predictor << '\n';
  for (const auto& inst : ds.instances) {
    os << inst.id << ',' << inst.services << ',' << inst.clouds;
    for (const auto& f : inst.features)
      os << ',' << format_real(f.distance) << ',' << format_real(f.cpu) << ','
         << format_real(f.deadline) << ',' << format_real(f.interference);
    for (const auto* col : {&inst.x_true, &inst.x_pred, &inst.eta})
      for (double v : *col) os << ',' << format_real(v);
    os << '\n';
  }
}

inline void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write dataset file '" + path + "'");
  write_dataset(os, ds);
}

inline Dataset read_dataset(std::istream& is) {
  Dataset ds;
  std::string line;
  if (!std::getline(is, line) || line.rfind("#schema=", 0) != 0)
    throw FormatError("dataset file lacks a schema header");
  for (auto tok : split(line.substr(1), ' ')) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = tok.substr(0, eq);
    const auto val = tok.substr(eq + 1);
    if (key == "schema" && val != kDatasetSchema)
      throw FormatError("unsupported dataset schema '" + std::string(val) + "'");
    if (key == "seed") ds.seed = static_cast<std::uint64_t>(std::stoull(std::string(val)));
    if (key == "split") ds.split = std::string(val);
    if (key == "M") ds.services = static_cast<int>(parse_int(val));
    if (key == "C") ds.clouds = static_cast<int>(parse_int(val));
    if (key == "predictor") ds.predictor = std::string(val);
  }
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto parts = split(line, ',');
    if (parts.size() < 3) throw FormatError("dataset row too short");
    ProblemInstance inst;
    inst.id = static_cast<std::uint64_t>(parse_int(parts[0]));
    inst.services = static_cast<int>(parse_int(parts[1]));
    inst.clouds = static_cast<int>(parse_int(parts[2]));
    const auto n = inst.dim();
    if (parts.size() != 3 + 7 * n) throw FormatError("dataset row has wrong column count");
    std::size_t c = 3;
    for (std::size_t k = 0; k < n; ++k, c += 4)
      inst.features.push_back({parse_real(parts[c]), parse_real(parts[c + 1]),
                               parse_real(parts[c + 2]), parse_real(parts[c + 3])});
    for (auto* col : {&inst.x_true, &inst.x_pred, &inst.eta})
      for (std::size_t k = 0; k < n; ++k) col->push_back(parse_real(parts[c++]));
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open dataset file '" + path + "'");
  return read_dataset(is);
}

// ---------------------------------------------------------------------------
// At-Least-One success probability and utility.
// ---------------------------------------------------------------------------

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// P = prod_j [1 - prod_i (1 - x_ij a_ij)], rates clamped to [0, 1].
inline double success_probability(std::span<const double> x, const Decision& a, int services,
                                  int clouds) {
  double p = 1.0;
  for (int j = 0; j < services; ++j) {
    double fail = 1.0;
    for (int i = 0; i < clouds; ++i) {
      const auto k = static_cast<std::size_t>(j * clouds + i);
      if (a[k]) fail *= 1.0 - clamp01(x[k]);
    }
    p *= 1.0 - fail;
  }
  return p;
}

inline double offloading_cost(std::span<const double> eta, const Decision& a) {
  double c = 0.0;
  for (std::size_t k = 0; k < eta.size(); ++k)
    if (a[k]) c += eta[k];
  return c;
}

// U = P(x, a) - sum eta_ij a_ij
inline double utility(std::span<const double> x, const Decision& a, std::span<const double> eta,
                      int services, int clouds) {
  return success_probability(x, a, services, clouds) - offloading_cost(eta, a);
}

// dU/dx at the clamped rates: a_ij * prod_{i' != i}(1 - x_i'j a_i'j) * prod_{j' != j} S_j'.
inline std::vector<double> utility_gradient_in_x(std::span<const double> x, const Decision& a,
                                                 int services, int clouds) {
  const auto n = static_cast<std::size_t>(services * clouds);
  std::vector<double> g(n, 0.0);
  std::vector<double> service_success(static_cast<std::size_t>(services));
  for (int j = 0; j < services; ++j) {
    double fail = 1.0;
    for (int i = 0; i < clouds; ++i) {
      const auto k = static_cast<std::size_t>(j * clouds + i);
      if (a[k]) fail *= 1.0 - clamp01(x[k]);
    }
    service_success[static_cast<std::size_t>(j)] = 1.0 - fail;
  }
  for (int j = 0; j < services; ++j) {
    double others = 1.0;
    for (int jj = 0; jj < services; ++jj)
      if (jj != j) others *= service_success[static_cast<std::size_t>(jj)];
    for (int i = 0; i < clouds; ++i) {
      const auto k = static_cast<std::size_t>(j * clouds + i);
      if (!a[k]) continue;
      double rest = 1.0;
      for (int ii = 0; ii < clouds; ++ii) {
        const auto kk = static_cast<std::size_t>(j * clouds + ii);
        if (ii != i && a[kk]) rest *= 1.0 - clamp01(x[kk]);
      }
      g[k] = rest * others;
    }
  }
  return g;
}

// Cost for the minimax form: f(x, a) = -U(x, a).
inline CostFunction negative_utility_cost(std::vector<double> eta, int services, int clouds) {
  CostFunction f;
  f.value = [eta, services, clouds](std::span<const double> x, const Decision& a) {
    return -utility(x, a, eta, services, clouds);
  };
  // Rates are clamped before evaluation, so the slope is zero outside [0, 1].
  f.gradient = [services, clouds](std::span<const double> x, const Decision& a) {
    auto g = utility_gradient_in_x(x, a, services, clouds);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = (x[k] < 0.0 || x[k] > 1.0) ? 0.0 : -g[k];
    return g;
  };
  return f;
}

// ---------------------------------------------------------------------------
// Context predictors.
// ---------------------------------------------------------------------------

class SuccessRatePredictor {
 public:
  virtual ~SuccessRatePredictor() = default;
  virtual std::string kind() const = 0;
  virtual double predict(const Feature& f) const = 0;
  virtual void save(std::ostream& os) const = 0;

  std::vector<double> predict(const std::vector<Feature>& fs) const {
    std::vector<double> out;
    out.reserve(fs.size());
    for (const auto& f : fs) out.push_back(predict(f));
    return out;
  }
};

// x = w_d d + w_cpu cpu + w_L L + bias, clamped to [0, 1].
class LinearPredictor final : public SuccessRatePredictor {
 public:
  double w_distance = 0.0;
  double w_cpu = 0.0;
  double w_deadline = 0.0;
  double bias = 0.0;

  double raw(const Feature& f) const {
    return w_distance * f.distance + w_cpu * f.cpu + w_deadline * f.deadline + bias;
  }
  std::string kind() const override { return "linear"; }
  double predict(const Feature& f) const override { return clamp01(raw(f)); }
  void save(std::ostream& os) const override {
    os << "predictor=linear\n"
       << join_reals(std::array{w_distance, w_cpu, w_deadline, bias}, ' ') << '\n';
  }
};

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordinary least squares of x_true on (distance, cpu, deadline, 1) over every
// (instance, link) pair.
inline LinearPredictor fit_linear(const std::vector<Feature>& features,
                                  const std::vector<double>& targets) {
  if (features.size() != targets.size()) throw ConfigError("feature/target count mismatch");
  if (features.size() < 4) throw FitError("linear fit needs at least 4 samples");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(features.size()), 4);
  Eigen::VectorXd y(static_cast<Eigen::Index>(features.size()));
  for (std::size_t r = 0; r < features.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    X(i, 0) = features[r].distance;
    X(i, 1) = features[r].cpu;
    X(i, 2) = features[r].deadline;
    X(i, 3) = 1.0;
    y(i) = targets[r];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < 4) throw FitError("rank-deficient design matrix in linear fit");
  const Eigen::VectorXd w = qr.solve(y);
  LinearPredictor p;
  p.w_distance = w(0);
  p.w_cpu = w(1);
  p.w_deadline = w(2);
  p.bias = w(3);
  return p;
}

inline void flatten_links(const Dataset& ds, std::vector<Feature>& features,
                          std::vector<double>& targets) {
  for (const auto& inst : ds.instances) {
    features.insert(features.end(), inst.features.begin(), inst.features.end());
    targets.insert(targets.end(), inst.x_true.begin(), inst.x_true.end());
  }
}

inline LinearPredictor fit_linear(const Dataset& train) {
  std::vector<Feature> f;
  std::vector<double> t;
  flatten_links(train, f, t);
  return fit_linear(f, t);
}

// Linear base plus a 3 -> 20 -> 20 -> 1 relu network on standardized
// (distance, cpu, deadline), clamped to [0, 1].
class ResidualPredictor final : public SuccessRatePredictor {
 public:
  LinearPredictor base;
  nn::Network residual;
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> scale{1.0, 1.0, 1.0};

  nn::Vector encode(const Feature& f) const {
    nn::Vector v(3);
    v(0) = (f.distance - mean[0]) / scale[0];
    v(1) = (f.cpu - mean[1]) / scale[1];
    v(2) = (f.deadline - mean[2]) / scale[2];
    return v;
  }

  std::string kind() const override { return "residual"; }
  double predict(const Feature& f) const override {
    return clamp01(base.raw(f) + nn::predict(residual, encode(f))(0));
  }
  void save(std::ostream& os) const override {
    os << "predictor=residual\n"
       << join_reals(std::array{base.w_distance, base.w_cpu, base.w_deadline, base.bias}, ' ')
       << '\n'
       << join_reals(mean, ' ') << '\n'
       << join_reals(scale, ' ') << '\n';
    nn::save_network(os, residual);
  }
};

struct ResidualFitConfig {
  int epochs = 60;
  double lr = 1e-4;
  int batch = 64;
  std::uint64_t seed = 7;
};

struct ResidualFitReport {
  std::vector<double> epoch_mse;
};

// Fits the residual network to x_true - base(features) by Adam on MSE.
inline ResidualPredictor fit_residual(const std::vector<Feature>& features,
                                      const std::vector<double>& targets,
                                      const LinearPredictor& base, const ResidualFitConfig& cfg = {},
                                      ResidualFitReport* report = nullptr) {
  if (features.empty() || features.size() != targets.size())
    throw ConfigError("residual fit needs matching, nonempty features and targets");
  ResidualPredictor p;
  p.base = base;
  const double n = static_cast<double>(features.size());
  for (const auto& f : features) {
    p.mean[0] += f.distance / n;
    p.mean[1] += f.cpu / n;
    p.mean[2] += f.deadline / n;
  }
  std::array<double, 3> var{0.0, 0.0, 0.0};
  for (const auto& f : features) {
    var[0] += (f.distance - p.mean[0]) * (f.distance - p.mean[0]) / n;
    var[1] += (f.cpu - p.mean[1]) * (f.cpu - p.mean[1]) / n;
    var[2] += (f.deadline - p.mean[2]) * (f.deadline - p.mean[2]) / n;
  }
  for (int i = 0; i < 3; ++i) p.scale[i] = var[i] > 0 ? std::sqrt(var[i]) : 1.0;

  Rng rng = make_rng(cfg.seed, 0x5e51d);
  p.residual = nn::Network::make({3, 20, 20, 1}, nn::Activation::relu, nn::Activation::identity, rng,
                                 nn::Init::zero);
  auto adam = nn::AdamState::for_network(p.residual);

  const auto count = features.size();
  nn::Matrix inputs(3, static_cast<Eigen::Index>(count));
  nn::Vector residual_target(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    inputs.col(static_cast<Eigen::Index>(i)) = p.encode(features[i]);
    residual_target(static_cast<Eigen::Index>(i)) = targets[i] - base.raw(features[i]);
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(std::max(cfg.batch, 1));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sse = 0.0;
    for (std::size_t start = 0; start < count; start += batch) {
      const auto end = std::min(count, start + batch);
      const auto b = static_cast<Eigen::Index>(end - start);
      nn::Matrix xb(3, b);
      nn::Matrix yb(1, b);
      for (std::size_t r = start; r < end; ++r) {
        xb.col(static_cast<Eigen::Index>(r - start)) = inputs.col(static_cast<Eigen::Index>(order[r]));
        yb(0, static_cast<Eigen::Index>(r - start)) = residual_target(static_cast<Eigen::Index>(order[r]));
      }
      auto [out, tape] = nn::forward(p.residual, xb);
      const nn::Matrix diff = out - yb;
      sse += diff.squaredNorm();
      const nn::Gradients g = nn::backward(p.residual, tape, (2.0 / static_cast<double>(b)) * diff);
      nn::adam_step(p.residual, g, adam, cfg.lr);
    }
    if (report) report->epoch_mse.push_back(sse / n);
  }
  return p;
}

inline ResidualPredictor fit_residual(const Dataset& train, const LinearPredictor& base,
                                      const ResidualFitConfig& cfg = {},
                                      ResidualFitReport* report = nullptr) {
  std::vector<Feature> f;
  std::vector<double> t;
  flatten_links(train, f, t);
  return fit_residual(f, t, base, cfg, report);
}

inline std::unique_ptr<SuccessRatePredictor> load_predictor(std::istream& is) {
  std::string line;
  std::getline(is, line);
  auto read_four = [&](std::array<double, 4>& v) {
    std::string l;
    if (!std::getline(is, l)) throw FormatError("truncated predictor file");
    const auto parts = split(l, ' ');
    if (parts.size() != 4) throw FormatError("expected 4 predictor coefficients");
    for (std::size_t i = 0; i < 4; ++i) v[i] = parse_real(parts[i]);
  };
  auto read_three = [&](std::array<double, 3>& v) {
    std::string l;
    if (!std::getline(is, l)) throw FormatError("truncated predictor file");
    const auto parts = split(l, ' ');
    if (parts.size() != 3) throw FormatError("expected 3 normalization values");
    for (std::size_t i = 0; i < 3; ++i) v[i] = parse_real(parts[i]);
  };
  std::array<double, 4> c{};
  if (line == "predictor=linear") {
    read_four(c);
    auto p = std::make_unique<LinearPredictor>();
    p->w_distance = c[0];
    p->w_cpu = c[1];
    p->w_deadline = c[2];
    p->bias = c[3];
    return p;
  }
  if (line == "predictor=residual") {
    auto p = std::make_unique<ResidualPredictor>();
    read_four(c);
    p->base.w_distance = c[0];
    p->base.w_cpu = c[1];
    p->base.w_deadline = c[2];
    p->base.bias = c[3];
    read_three(p->mean);
    read_three(p->scale);
    p->residual = nn::load_network(is);
    return p;
  }
  throw FormatError("unknown predictor header '" + line + "'");
}

inline void save_predictor(const std::string& path, const SuccessRatePredictor& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write predictor file '" + path + "'");
  p.save(os);
}

inline std::unique_ptr<SuccessRatePredictor> load_predictor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open predictor file '" + path + "'");
  return load_predictor(is);
}

// Copy of `ds` whose x_pred comes from `predictor`.
inline Dataset annotate(Dataset ds, const SuccessRatePredictor& predictor) {
  ds.predictor = predictor.kind();
  for (auto& inst : ds.instances) inst.x_pred = predictor.predict(inst.features);
  return ds;
}

inline double prediction_error_norm(const ProblemInstance& inst) {
  double s = 0.0;
  for (std::size_t k = 0; k < inst.dim(); ++k) {
    const double d = inst.x_pred[k] - inst.x_true[k];
    s += d * d;
  }
  return std::sqrt(s);
}

// Linear-interpolated percentile (0..100) of values.
inline double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ConfigError("percentile of an empty set");
  if (pct < 0.0 || pct > 100.0) throw ConfigError("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Error budget: percentile of per-instance |x_pred - x_true|_2.
inline double error_budget(const Dataset& ds, double pct = 99.0) {
  std::vector<double> norms;
  norms.reserve(ds.instances.size());
  for (const auto& inst : ds.instances) norms.push_back(prediction_error_norm(inst));
  return percentile(std::move(norms), pct);
}

inline double error_budget(const Dataset& ds, const SuccessRatePredictor& p, double pct = 99.0) {
  return error_budget(annotate(ds, p), pct);
}

inline double mean_squared_error(const Dataset& ds) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& inst : ds.instances)
    for (std::size_t k = 0; k < inst.dim(); ++k, ++n) {
      const double d = inst.x_pred[k] - inst.x_true[k];
      s += d * d;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace lrco::vec
