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
//  Dense feed-forward networks with reverse-mode gradients and Adam.
//
//  Activations are stored column-per-sample: a batch of B inputs of width n
//  is an n x B matrix. forward() records every layer's input and output on a
//  Tape; backward() replays it in reverse.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lrco/common.hpp"

namespace lrco::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { identity, relu, sigmoid, tanh, softmax };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "softmax") return Activation::softmax;
  throw FormatError("unknown activation '" + std::string(s) + "'");
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Affine map followed by an elementwise (or column-wise, for softmax)
// activation. Shape is fixed at construction.
class DenseLayer {
 public:
  DenseLayer(Eigen::Index out, Eigen::Index in, Activation act)
      : weights_(Matrix::Zero(out, in)), bias_(Vector::Zero(out)), act_(act) {
    if (out <= 0 || in <= 0) throw ConfigError("layer dimensions must be positive");
  }

  Eigen::Index in_dim() const { return weights_.cols(); }
  Eigen::Index out_dim() const { return weights_.rows(); }
  Activation activation() const { return act_; }

  const Matrix& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }
  // Maps cannot be resized, so the shape invariant holds.
  Eigen::Map<Matrix> weights() { return {weights_.data(), weights_.rows(), weights_.cols()}; }
  Eigen::Map<Vector> bias() { return {bias_.data(), bias_.size()}; }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(weights_.size() + bias_.size());
  }

 private:
  Matrix weights_;
  Vector bias_;
  Activation act_;
};

inline void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::identity: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::sigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::softmax:
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double mx = z.col(c).maxCoeff();
        z.col(c) = (z.col(c).array() - mx).exp().matrix();
        z.col(c) /= z.col(c).sum();
      }
      break;
  }
}

// Maps d(loss)/d(output) to d(loss)/d(pre-activation), given the output.
inline Matrix activation_backward(Activation act, const Matrix& out, const Matrix& grad) {
  switch (act) {
    case Activation::identity: return grad;
    case Activation::relu: return (out.array() > 0.0).select(grad, 0.0);
    case Activation::sigmoid: return (grad.array() * out.array() * (1.0 - out.array())).matrix();
    case Activation::tanh: return (grad.array() * (1.0 - out.array().square())).matrix();
    case Activation::softmax: {
      Matrix dz(out.rows(), out.cols());
      for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const double dot = grad.col(c).dot(out.col(c));
        dz.col(c) = (out.col(c).array() * (grad.col(c).array() - dot)).matrix();
      }
      return dz;
    }
  }
  return grad;
}

enum class Init { he, xavier, zero };

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    for (std::size_t i = 1; i < layers_.size(); ++i)
      if (layers_[i].in_dim() != layers_[i - 1].out_dim())
        throw ConfigError("adjacent layer dimensions disagree");
  }

  // sizes = {in, h1, ..., out}. Hidden layers use `hidden`, the last uses
  // `output`. Weights are drawn from a scaled normal; biases start at zero.
  static Network make(const std::vector<int>& sizes, Activation hidden, Activation output,
                      Rng& rng, Init final_init = Init::xavier) {
    if (sizes.size() < 2) throw ConfigError("network needs at least input and output sizes");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const bool last = i + 2 == sizes.size();
      DenseLayer layer(sizes[i + 1], sizes[i], last ? output : hidden);
      const Init init = last ? final_init : (hidden == Activation::relu ? Init::he : Init::xavier);
      double scale = 0.0;
      if (init == Init::he) scale = std::sqrt(2.0 / sizes[i]);
      if (init == Init::xavier) scale = std::sqrt(2.0 / (sizes[i] + sizes[i + 1]));
      auto w = layer.weights();
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * standard_normal(rng);
      layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
  }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  Eigen::Index in_dim() const { return layers_.front().in_dim(); }
  Eigen::Index out_dim() const { return layers_.back().out_dim(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
  }

  // Flat parameter access in layer order, weights column-major then bias.
  double& parameter(std::size_t k) {
    for (auto& l : layers_) {
      const auto nw = static_cast<std::size_t>(l.weights().size());
      if (k < nw) return l.weights().data()[k];
      k -= nw;
      if (k < static_cast<std::size_t>(l.bias().size())) return l.bias().data()[k];
      k -= static_cast<std::size_t>(l.bias().size());
    }
    throw ConfigError("parameter index out of range");
  }

  friend bool operator==(const Network& a, const Network& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto& x = a.layers_[i];
      const auto& y = b.layers_[i];
      if (x.activation() != y.activation() || x.weights().rows() != y.weights().rows() ||
          x.weights().cols() != y.weights().cols() || x.weights() != y.weights() ||
          x.bias() != y.bias())
        return false;
    }
    return true;
  }

 private:
  std::vector<DenseLayer> layers_;
};

struct Tape {
  std::vector<Matrix> inputs;   // input of layer i
  std::vector<Matrix> outputs;  // post-activation output of layer i
};

struct LayerGrads {
  Matrix weights;
  Vector bias;
};

struct Gradients {
  std::vector<LayerGrads> layers;
  Matrix input;

  static Gradients zeros_like(const Network& net) {
    Gradients g;
    for (const auto& l : net.layers())
      g.layers.push_back({Matrix::Zero(l.out_dim(), l.in_dim()), Vector::Zero(l.out_dim())});
    return g;
  }

  Gradients& operator+=(const Gradients& o) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weights += o.layers[i].weights;
      layers[i].bias += o.layers[i].bias;
    }
    return *this;
  }

  Gradients& operator*=(double s) {
    for (auto& l : layers) {
      l.weights *= s;
      l.bias *= s;
    }
    return *this;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& l : layers) s += l.weights.squaredNorm() + l.bias.squaredNorm();
    return s;
  }

  // Same flat order as Network::parameter().
  double flat(std::size_t k) const {
    for (const auto& l : layers) {
      const auto nw = static_cast<std::size_t>(l.weights.size());
      if (k < nw) return l.weights.data()[k];
      k -= nw;
      if (k < static_cast<std::size_t>(l.bias.size())) return l.bias.data()[k];
      k -= static_cast<std::size_t>(l.bias.size());
    }
    throw ConfigError("gradient index out of range");
  }

  std::size_t non_finite_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
      n += static_cast<std::size_t>((!l.weights.array().isFinite()).count());
      n += static_cast<std::size_t>((!l.bias.array().isFinite()).count());
    }
    return n;
  }
};

inline void check_input(const Network& net, const Matrix& input) {
  if (net.layers().empty()) throw ConfigError("empty network");
  if (input.rows() != net.in_dim())
    throw ConfigError("input dimension " + std::to_string(input.rows()) +
                      " does not match network input " + std::to_string(net.in_dim()));
}

// Forward pass over a batch (one sample per column), recording a tape.
inline std::pair<Matrix, Tape> forward(const Network& net, const Matrix& input) {
  check_input(net, input);
  Tape tape;
  tape.inputs.reserve(net.layers().size());
  tape.outputs.reserve(net.layers().size());
  Matrix a = input;
  for (const auto& l : net.layers()) {
    tape.inputs.push_back(a);
    Matrix z = l.weights() * a;
    z.colwise() += l.bias();
    apply_activation(l.activation(), z);
    tape.outputs.push_back(z);
    a = std::move(z);
  }
  return {a, std::move(tape)};
}

// Forward pass without recording; used on frozen networks.
inline Matrix predict(const Network& net, const Matrix& input) {
  check_input(net, input);
  Matrix a = input;
  for (const auto& l : net.layers()) {
    Matrix z = l.weights() * a;
    z.colwise() += l.bias();
    apply_activation(l.activation(), z);
    a = std::move(z);
  }
  return a;
}

inline Vector predict(const Network& net, const Vector& input) {
  return predict(net, Matrix(input)).col(0);
}

enum class GradientAt { output, preactivation };

// Reverse pass. Parameter gradients are summed over the batch columns.
// With GradientAt::preactivation, `output_grad` is taken with respect to the
// last layer's pre-activation and its activation derivative is skipped.
inline Gradients backward(const Network& net, const Tape& tape, const Matrix& output_grad,
                          GradientAt at = GradientAt::output) {
  const auto n = net.layers().size();
  if (tape.outputs.size() != n || tape.inputs.size() != n)
    throw std::logic_error("tape does not match network");
  if (output_grad.rows() != tape.outputs.back().rows() ||
      output_grad.cols() != tape.outputs.back().cols())
    throw std::logic_error("output gradient shape does not match tape");
  Gradients g;
  g.layers.resize(n);
  Matrix grad = output_grad;
  for (std::size_t k = n; k-- > 0;) {
    const auto& l = net.layers()[k];
    const Matrix dz = (k + 1 == n && at == GradientAt::preactivation)
                          ? grad
                          : activation_backward(l.activation(), tape.outputs[k], grad);
    g.layers[k].weights.noalias() = dz * tape.inputs[k].transpose();
    g.layers[k].bias = dz.rowwise().sum();
    grad.noalias() = l.weights().transpose() * dz;
  }
  g.input = std::move(grad);
  return g;
}

// Rescales g in place so its global L2 norm is at most max_norm. Returns the
// norm before clipping.
inline double clip_global_norm(Gradients& g, double max_norm) {
  const double norm = std::sqrt(g.squared_norm());
  if (norm > max_norm && norm > 0.0) g *= max_norm / norm;
  return norm;
}

struct AdamState {
  std::vector<LayerGrads> first_moment;
  std::vector<LayerGrads> second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_network(const Network& net) {
    AdamState s;
    auto z = Gradients::zeros_like(net);
    s.first_moment = z.layers;
    s.second_moment = std::move(z.layers);
    return s;
  }
};

struct AdamOutcome {
  bool applied = true;
  std::size_t non_finite = 0;
};

// Bias-corrected Adam. Non-finite gradients leave parameters and state
// untouched and are reported back.
inline AdamOutcome adam_step(Network& net, const Gradients& grads, AdamState& state, double lr) {
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (grads.layers.size() != net.layers().size() ||
      state.first_moment.size() != net.layers().size())
    throw ConfigError("Adam state or gradients do not match the network");
  if (const auto bad = grads.non_finite_count(); bad > 0) return {false, bad};

  ++state.step_count;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.epsilon;
  auto update = [&](auto param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    auto& layer = net.layers()[i];
    update(layer.weights(), grads.layers[i].weights, state.first_moment[i].weights,
           state.second_moment[i].weights);
    update(layer.bias(), grads.layers[i].bias, state.first_moment[i].bias,
           state.second_moment[i].bias);
  }
  return {};
}

// Scalar loss of a single network output, with its gradient.
struct Loss {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// Max relative error between backward() and central differences over every
// parameter (or the first `max_params` when nonzero) and every input.
inline double grad_check(Network net, const Vector& input, const Loss& loss,
                         double step = 1e-5, std::size_t max_params = 0) {
  auto [out, tape] = forward(net, Matrix(input));
  const Gradients g = backward(net, tape, Matrix(loss.gradient(out.col(0))));
  auto eval = [&](const Network& n, const Vector& x) { return loss.value(predict(n, x)); };

  double worst = 0.0;
  std::size_t k = 0;
  const std::size_t limit = max_params == 0 ? net.parameter_count() : max_params;
  for (std::size_t li = 0; li < net.layers().size() && k < limit; ++li) {
    auto check = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + step;
      const double up = eval(net, input);
      p = saved - step;
      const double down = eval(net, input);
      p = saved;
      worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * step)));
    };
    auto w = net.layers()[li].weights();
    for (Eigen::Index c = 0; c < w.cols() && k < limit; ++c)
      for (Eigen::Index r = 0; r < w.rows() && k < limit; ++r, ++k)
        check(w(r, c), g.layers[li].weights(r, c));
    auto b = net.layers()[li].bias();
    for (Eigen::Index r = 0; r < b.size() && k < limit; ++r, ++k) check(b(r), g.layers[li].bias(r));
  }
  Vector x = input;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x(i);
    x(i) = saved + step;
    const double up = eval(net, x);
    x(i) = saved - step;
    const double down = eval(net, x);
    x(i) = saved;
    worst = std::max(worst, relative_error(g.input(i, 0), (up - down) / (2.0 * step)));
  }
  return worst;
}

// Checkpoint text format:
//   layers=<n>
//   dims=<out>x<in> activation=<name>
//   <out lines of `in` weights, row-major>
//   <one line of `out` biases>
inline void save_network(std::ostream& os, const Network& net) {
  os << "layers=" << net.layers().size() << '\n';
  for (const auto& l : net.layers()) {
    os << "dims=" << l.out_dim() << 'x' << l.in_dim() << " activation=" << to_string(l.activation())
       << '\n';
    for (Eigen::Index r = 0; r < l.out_dim(); ++r) {
      for (Eigen::Index c = 0; c < l.in_dim(); ++c) {
        if (c) os << ' ';
        os << format_real(l.weights()(r, c));
      }
      os << '\n';
    }
    for (Eigen::Index r = 0; r < l.out_dim(); ++r) {
      if (r) os << ' ';
      os << format_real(l.bias()(r));
    }
    os << '\n';
  }
}

namespace detail {

inline std::string next_line(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("unexpected end of checkpoint");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline std::string_view value_after(std::string_view token, std::string_view key) {
  if (token.substr(0, key.size()) != key) throw FormatError("expected '" + std::string(key) + "'");
  return token.substr(key.size());
}

inline void read_row(const std::string& line, Eigen::Index n, auto&& sink) {
  const auto parts = split(line, ' ');
  if (static_cast<Eigen::Index>(parts.size()) != n)
    throw FormatError("checkpoint row has " + std::to_string(parts.size()) + " values, expected " +
                      std::to_string(n));
  for (Eigen::Index i = 0; i < n; ++i) sink(i, parse_real(parts[static_cast<std::size_t>(i)]));
}

}  // namespace detail

inline Network load_network(std::istream& is) {
  const auto count = parse_int(detail::value_after(detail::next_line(is), "layers="));
  if (count <= 0) throw FormatError("checkpoint has no layers");
  std::vector<DenseLayer> layers;
  for (long long k = 0; k < count; ++k) {
    const auto header = detail::next_line(is);
    const auto parts = split(header, ' ');
    if (parts.size() != 2) throw FormatError("bad layer header '" + header + "'");
    const auto dims = split(detail::value_after(parts[0], "dims="), 'x');
    if (dims.size() != 2) throw FormatError("bad dims in '" + header + "'");
    const auto out = parse_int(dims[0]);
    const auto in = parse_int(dims[1]);
    DenseLayer layer(out, in, activation_from_string(detail::value_after(parts[1], "activation=")));
    auto w = layer.weights();
    for (Eigen::Index r = 0; r < out; ++r)
      detail::read_row(detail::next_line(is), in, [&](Eigen::Index c, double v) { w(r, c) = v; });
    auto b = layer.bias();
    detail::read_row(detail::next_line(is), out, [&](Eigen::Index r, double v) { b(r) = v; });
    layers.push_back(std::move(layer));
  }
  return Network(std::move(layers));
}

inline std::string to_text(const Network& net) {
  std::ostringstream os;
  save_network(os, net);
  return os.str();
}

inline Network from_text(const std::string& text) {
  std::istringstream is(text);
  return load_network(is);
}

// Learning rate after `epoch` completed epochs: lr0 * factor^(epoch / every).
inline double step_decay(double lr0, int epoch, int every = 20, double factor = 0.9) {
  return lr0 * std::pow(factor, epoch / every);
}

}  // namespace lrco::nn
