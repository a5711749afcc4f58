#pragma once

// Dense tensors with a tape-based reverse-mode autodiff, an LSTM cell and
// Adagrad. Everything is 64-bit; the tape is single threaded.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace opinrec::nn {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A named trainable value. `frozen` parameters never receive gradient and are
/// skipped by the optimizer.
struct Tensor {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool frozen = false;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<double> v);

  std::size_t size() const { return value.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  double& at(std::size_t r, std::size_t c) { return value[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return value[r * cols() + c]; }
  void zero_grad();
};

/// Ordered store of named parameters. References handed out stay valid for
/// the lifetime of the store.
class Parameters {
 public:
  Tensor& add(const std::string& name, Shape shape);
  Tensor& add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  void zero_grad();
  void set_frozen_prefix(const std::string& prefix, bool frozen);
  std::size_t count() const;  // number of scalar values

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  std::size_t tensor_count() const { return tensors_.size(); }

 private:
  std::map<std::string, Tensor> tensors_;
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  const std::vector<double>& value() const;
  const std::vector<double>& grad() const;
  std::size_t size() const { return value().size(); }
  double operator[](std::size_t i) const { return value()[i]; }
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// `train` enables dropout; `seed` drives dropout masks.
  explicit Tape(bool train = false, std::uint64_t seed = 0);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(Tensor& t);  // cached per tensor
  Var constant(std::vector<double> value, Shape shape);
  Var constant(std::vector<double> value);
  Var scalar(double v);
  Var zeros(std::size_t n);

  /// Populates gradients of every parameter reachable from `loss` and clears
  /// the tape.
  void backward(Var loss);

  bool training() const { return train_; }
  Rng& rng() { return rng_; }
  std::size_t node_count() const { return nodes_.size(); }

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool needs_grad = false;
    Tensor* leaf = nullptr;
    std::function<void(Tape&, std::size_t)> back;
  };

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  Var push(Shape shape, std::vector<double> value, bool needs_grad,
           std::function<void(Tape&, std::size_t)> back);
  std::vector<double>& grad_of(std::size_t id);

 private:
  bool train_;
  Rng rng_;
  std::vector<Node> nodes_;
  std::unordered_map<Tensor*, std::size_t> param_ids_;
};

// Primitive operations. Shapes: vectors are {n}, matrices {r, c}; a scalar is
// {1}. Binary elementwise ops broadcast a size-1 operand.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
Var softmax(Var a);
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var mean(std::span<const Var> items);  // elementwise mean of same-shaped vars
Var sum(Var a);                        // scalar sum of all entries
Var dropout(Var a, double keep);       // inverted dropout, identity in eval mode
Var embedding_lookup(Tape& tape, Tensor& table, std::size_t row);
Var embedding_mean(Tape& tape, Tensor& table, std::span<const int> rows);
Var squared_error(Var pred, double target);
Var nll(Var logits, std::size_t target);  // -log softmax(logits)[target]
/// Σ_i weights[i] * items[i]; weights has shape {n}.
Var weighted_sum(Var weights, std::span<const Var> items);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);

std::vector<double> softmax_values(std::span<const double> logits);

/// Parameters of an uncoupled-gate LSTM without peepholes. Each gate owns a
/// hidden x (input + hidden) matrix and a bias; h0/c0 are learned.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(Parameters& params, const std::string& prefix, std::size_t input_dim,
           std::size_t hidden_dim, Rng& rng, double init_bound = 0.08);

  struct State {
    Var h;
    Var c;
  };

  State initial(Tape& tape) const;
  State step(Tape& tape, Var x, const State& state) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  Tensor* w_input_ = nullptr;
  Tensor* w_forget_ = nullptr;
  Tensor* w_output_ = nullptr;
  Tensor* w_cell_ = nullptr;
  Tensor* b_input_ = nullptr;
  Tensor* b_forget_ = nullptr;
  Tensor* b_output_ = nullptr;
  Tensor* b_cell_ = nullptr;
  Tensor* h0_ = nullptr;
  Tensor* c0_ = nullptr;
};

class Adagrad {
 public:
  explicit Adagrad(double lr = 0.1, double eps = 1e-6) : lr_(lr), eps_(eps) {}

  /// accumulator += g^2; param -= lr * g / (sqrt(accumulator) + eps).
  /// Frozen tensors are skipped. Grads are left in place.
  void update(Parameters& params);
  void update(const std::string& name, Tensor& t);

  double learning_rate() const { return lr_; }
  double epsilon() const { return eps_; }
  const std::map<std::string, std::vector<double>>& accumulators() const { return acc_; }

 private:
  double lr_;
  double eps_;
  std::map<std::string, std::vector<double>> acc_;
};

}  // namespace opinrec::nn
