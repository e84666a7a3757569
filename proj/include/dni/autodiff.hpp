#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dni/tensor.hpp"

namespace dni {

template <typename T>
struct Parameter {
  Parameter(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

// Owns parameters with stable addresses; insertion order is the canonical
// order for optimizers and checkpoints.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Shape shape);
  Parameter<T>* find(const std::string& name);
  const Parameter<T>* find(const std::string& name) const;
  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::deque<Parameter<T>> params_;
};

// Uniform in +-sqrt(1/fan_in).
template <typename T>
void init_uniform(Parameter<T>& p, std::size_t fan_in, std::mt19937_64& rng);

struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const { return id != npos; }
};

struct ConvSpec {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;

  static ConvSpec valid(std::size_t stride = 1) { return {stride, 1, 0, 0}; }
  // Left-pads (k-1)*dilation zeros so output[t] only sees input[<= t].
  static ConvSpec causal(std::size_t kernel, std::size_t dilation) {
    return {1, dilation, (kernel - 1) * dilation, 0};
  }
  // Pads k - stride zeros split across both ends so T' = T / stride.
  static ConvSpec strided_same(std::size_t kernel, std::size_t stride) {
    const std::size_t total = kernel > stride ? kernel - stride : 0;
    return {stride, 1, total / 2, total - total / 2};
  }
};

std::size_t conv_output_length(std::size_t length, std::size_t kernel, const ConvSpec& spec);

inline constexpr double kVarianceFloor = 1e-3;
inline constexpr double kVarianceCeil = 1e3;

// Records primitive operations in execution order; backward() walks the
// record in reverse, accumulates into Parameter::grad and clears the tape.
// Activations are rank-3 tensors laid out batch x channel x time.
template <typename T>
class Tape {
 public:
  // With record_gradients=false parameters enter as constants and no
  // backward closures are kept (inference).
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value);
  Var param(Parameter<T>& p);

  const Tensor<T>& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // x: B x Cin x T, w: Cout x Cin x k, b: Cout (optional).
  Var conv1d(Var x, Var w, Var b, const ConvSpec& spec);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var upsample_repeat(Var a, std::size_t factor);
  Var concat_channels(Var a, Var b);
  Var slice_channels(Var a, std::size_t begin, std::size_t count);
  Var sum(Var a);
  Var mean(Var a);

  // Mean over included elements of 0.5 * (ln(2 pi s2) + (x - mu)^2 / s2)
  // with s2 = clamp(exp(raw_var), 1e-3, 1e3). include has one flag per
  // (batch, channel) row; empty means every row counts.
  Var gaussian_nll(const Tensor<T>& target, Var mean, Var raw_var,
                   const std::vector<std::uint8_t>& include = {});

  // mean over (batch, t >= 1) of ||z_t - z_{t-1}||^2
  Var slowness(Var z);
  // mean over (batch, t) of max(0, ||z_t||^2 - margin)
  Var margin_penalty(Var z, T margin);

  void backward(Var loss);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void(Tape&, std::size_t)> back;
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
  };

  Var push(Tensor<T> value, bool needs_grad, std::function<void(Tape&, std::size_t)> back);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor<T>& grad_of(std::size_t id);

  std::vector<Node> nodes_;
  bool record_ = true;
};

template <typename T>
struct AdamConfig {
  T learning_rate = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

// Bias-corrected adaptive-moment optimizer. Moments are kept per parameter in
// the order the parameters were supplied.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig<T> config = {});

  void step();
  void zero_grad();
  std::uint64_t steps() const { return step_; }
  const AdamConfig<T>& config() const { return config_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig<T> config_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace dni
