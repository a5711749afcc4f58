#include "opinrec/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace opinrec::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void check_same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::logic_error("vars belong to different tapes");
}

bool needs(const Var& v) { return v.tape()->node(v.id()).needs_grad; }

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
  value.assign(shape_size(shape), 0.0);
  grad.assign(value.size(), 0.0);
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), value(std::move(v)) {
  if (value.size() != shape_size(shape))
    throw ShapeError("tensor value length " + std::to_string(value.size()) +
                     " does not match shape " + shape_str(shape));
  grad.assign(value.size(), 0.0);
}

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

Tensor& Parameters::add(const std::string& name, Shape shape) {
  auto [it, inserted] = tensors_.emplace(name, Tensor(std::move(shape)));
  if (!inserted) throw std::logic_error("duplicate parameter " + name);
  return it->second;
}

Tensor& Parameters::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  Tensor& t = add(name, std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.value) v = dist(rng);
  return t;
}

Tensor& Parameters::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

const Tensor& Parameters::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

void Parameters::zero_grad() {
  for (auto& [_, t] : tensors_) t.zero_grad();
}

void Parameters::set_frozen_prefix(const std::string& prefix, bool frozen) {
  for (auto& [name, t] : tensors_)
    if (name.rfind(prefix, 0) == 0) t.frozen = frozen;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

const Shape& Var::shape() const { return tape_->node(id_).shape; }
const std::vector<double>& Var::value() const { return tape_->node(id_).value; }
const std::vector<double>& Var::grad() const { return tape_->node(id_).grad; }

double Var::scalar() const {
  if (size() != 1) throw ShapeError("expected scalar, got " + shape_str(shape()));
  return value()[0];
}

Tape::Tape(bool train, std::uint64_t seed) : train_(train), rng_(seed) {}

Var Tape::push(Shape shape, std::vector<double> value, bool needs_grad,
               std::function<void(Tape&, std::size_t)> back) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Var Tape::param(Tensor& t) {
  if (auto it = param_ids_.find(&t); it != param_ids_.end()) return Var(this, it->second);
  Var v = push(t.shape, t.value, !t.frozen, nullptr);
  nodes_[v.id()].leaf = &t;
  param_ids_.emplace(&t, v.id());
  return v;
}

Var Tape::constant(std::vector<double> value, Shape shape) {
  if (shape_size(shape) != value.size())
    throw ShapeError("constant length " + std::to_string(value.size()) + " vs shape " +
                     shape_str(shape));
  return push(std::move(shape), std::move(value), false, nullptr);
}

Var Tape::constant(std::vector<double> value) {
  Shape s{value.size()};
  return constant(std::move(value), std::move(s));
}

Var Tape::scalar(double v) { return constant({v}, {1}); }

Var Tape::zeros(std::size_t n) { return constant(std::vector<double>(n, 0.0), {n}); }

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::logic_error("loss belongs to another tape");
  if (loss.size() != 1) throw ShapeError("backward needs a scalar loss, got " + shape_str(loss.shape()));
  if (nodes_.empty()) throw std::logic_error("backward on empty tape");
  grad_of(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.back) n.back(*this, id);
    if (n.leaf) {
      auto& g = n.leaf->grad;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  }
  nodes_.clear();
  param_ids_.clear();
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& tape = *a.tape();
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2) throw ShapeError("matmul lhs must be a matrix, got " + shape_str(sa));
  std::size_t m = sa[0], k = sa[1];
  std::size_t n = sb.size() == 2 ? sb[1] : 1;
  std::size_t kb = sb.size() == 2 ? sb[0] : (sb.size() == 1 ? sb[0] : 0);
  if (kb != k) throw ShapeError("matmul shape mismatch " + shape_str(sa) + " * " + shape_str(sb));
  std::vector<double> out(m * n);
  MatMap(out.data(), m, n).noalias() =
      ConstMatMap(a.value().data(), m, k) * ConstMatMap(b.value().data(), k, n);
  Shape so = sb.size() == 2 ? Shape{m, n} : Shape{m};
  std::size_t ia = a.id(), ib = b.id();
  return tape.push(std::move(so), std::move(out), needs(a) || needs(b),
                   [ia, ib, m, k, n](Tape& t, std::size_t self) {
                     ConstMatMap g(t.node(self).grad.data(), m, n);
                     if (t.node(ia).needs_grad) {
                       MatMap ga(t.grad_of(ia).data(), m, k);
                       ga.noalias() += g * ConstMatMap(t.node(ib).value.data(), k, n).transpose();
                     }
                     if (t.node(ib).needs_grad) {
                       MatMap gb(t.grad_of(ib).data(), k, n);
                       gb.noalias() += ConstMatMap(t.node(ia).value.data(), m, k).transpose() * g;
                     }
                   });
}

namespace {

enum class Binary { Add, Sub, Mul };

Var binary(Var a, Var b, Binary kind) {
  check_same_tape(a, b);
  Tape& tape = *a.tape();
  std::size_t na = a.size(), nb = b.size();
  if (na != nb && na != 1 && nb != 1)
    throw ShapeError("elementwise shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  std::size_t n = std::max(na, nb);
  Shape shape = na >= nb ? a.shape() : b.shape();
  const auto& va = a.value();
  const auto& vb = b.value();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = va[na == 1 ? 0 : i], y = vb[nb == 1 ? 0 : i];
    out[i] = kind == Binary::Add ? x + y : kind == Binary::Sub ? x - y : x * y;
  }
  std::size_t ia = a.id(), ib = b.id();
  return tape.push(std::move(shape), std::move(out), needs(a) || needs(b),
                   [ia, ib, na, nb, n, kind](Tape& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     if (t.node(ia).needs_grad) {
                       auto& ga = t.grad_of(ia);
                       const auto& vb = t.node(ib).value;
                       for (std::size_t i = 0; i < n; ++i) {
                         double d = kind == Binary::Mul ? g[i] * vb[nb == 1 ? 0 : i] : g[i];
                         ga[na == 1 ? 0 : i] += d;
                       }
                     }
                     if (t.node(ib).needs_grad) {
                       auto& gb = t.grad_of(ib);
                       const auto& va = t.node(ia).value;
                       for (std::size_t i = 0; i < n; ++i) {
                         double d = kind == Binary::Add   ? g[i]
                                    : kind == Binary::Sub ? -g[i]
                                                          : g[i] * va[na == 1 ? 0 : i];
                         gb[nb == 1 ? 0 : i] += d;
                       }
                     }
                   });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, Binary::Add); }
Var sub(Var a, Var b) { return binary(a, b, Binary::Sub); }
Var mul(Var a, Var b) { return binary(a, b, Binary::Mul); }
Var operator+(Var a, Var b) { return add(a, b); }
Var operator-(Var a, Var b) { return sub(a, b); }
Var operator*(Var a, Var b) { return mul(a, b); }

Var tanh(Var a) {
  Tape& tape = *a.tape();
  std::vector<double> out(a.value());
  for (double& v : out) v = std::tanh(v);
  std::size_t ia = a.id();
  return tape.push(a.shape(), std::move(out), needs(a), [ia](Tape& t, std::size_t self) {
    const auto& y = t.node(self).value;
    const auto& g = t.node(self).grad;
    auto& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Tape& tape = *a.tape();
  std::vector<double> out(a.value());
  for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
  std::size_t ia = a.id();
  return tape.push(a.shape(), std::move(out), needs(a), [ia](Tape& t, std::size_t self) {
    const auto& y = t.node(self).value;
    const auto& g = t.node(self).grad;
    auto& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

std::vector<double> softmax_values(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  double mx = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (double& v : out) z += (v = std::exp(v - mx));
  for (double& v : out) v /= z;
  return out;
}

Var softmax(Var a) {
  Tape& tape = *a.tape();
  if (a.size() == 0) throw ShapeError("softmax of empty tensor");
  std::size_t ia = a.id();
  return tape.push(a.shape(), softmax_values(a.value()), needs(a), [ia](Tape& t, std::size_t self) {
    const auto& y = t.node(self).value;
    const auto& g = t.node(self).grad;
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    auto& ga = t.grad_of(ia);
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += y[i] * (g[i] - dot);
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  Tape& tape = *parts.front().tape();
  std::vector<double> out;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  bool any = false;
  for (const Var& p : parts) {
    check_same_tape(parts.front(), p);
    offsets.push_back(out.size());
    ids.push_back(p.id());
    out.insert(out.end(), p.value().begin(), p.value().end());
    any = any || needs(p);
  }
  std::size_t n = out.size();
  return tape.push({n}, std::move(out), any,
                   [ids = std::move(ids), offsets = std::move(offsets)](Tape& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     for (std::size_t k = 0; k < ids.size(); ++k) {
                       if (!t.node(ids[k]).needs_grad) continue;
                       auto& gp = t.grad_of(ids[k]);
                       for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] + i];
                     }
                   });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var mean(std::span<const Var> items) {
  if (items.empty()) throw ShapeError("mean of nothing");
  Tape& tape = *items.front().tape();
  std::size_t n = items.front().size();
  std::vector<double> out(n, 0.0);
  std::vector<std::size_t> ids;
  bool any = false;
  for (const Var& v : items) {
    if (v.size() != n)
      throw ShapeError("mean shape mismatch " + shape_str(items.front().shape()) + " vs " +
                       shape_str(v.shape()));
    for (std::size_t i = 0; i < n; ++i) out[i] += v.value()[i];
    ids.push_back(v.id());
    any = any || needs(v);
  }
  double inv = 1.0 / static_cast<double>(items.size());
  for (double& v : out) v *= inv;
  return tape.push(items.front().shape(), std::move(out), any,
                   [ids = std::move(ids), inv](Tape& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     for (std::size_t id : ids) {
                       if (!t.node(id).needs_grad) continue;
                       auto& gp = t.grad_of(id);
                       for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[i] * inv;
                     }
                   });
}

Var sum(Var a) {
  Tape& tape = *a.tape();
  double s = std::accumulate(a.value().begin(), a.value().end(), 0.0);
  std::size_t ia = a.id();
  return tape.push({1}, {s}, needs(a), [ia](Tape& t, std::size_t self) {
    double g = t.node(self).grad[0];
    for (double& v : t.grad_of(ia)) v += g;
  });
}

Var dropout(Var a, double keep) {
  if (keep <= 0.0 || keep > 1.0) throw std::invalid_argument("dropout keep must lie in (0,1]");
  Tape& tape = *a.tape();
  if (!tape.training() || keep == 1.0) return a;
  std::bernoulli_distribution coin(keep);
  std::vector<double> mask(a.size());
  for (double& m : mask) m = coin(tape.rng()) ? 1.0 / keep : 0.0;
  std::vector<double> out(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  std::size_t ia = a.id();
  return tape.push(a.shape(), std::move(out), needs(a),
                   [ia, mask = std::move(mask)](Tape& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     auto& ga = t.grad_of(ia);
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
                   });
}

Var embedding_lookup(Tape& tape, Tensor& table, std::size_t row) {
  const int r = static_cast<int>(row);
  return embedding_mean(tape, table, std::span<const int>(&r, 1));
}

Var embedding_mean(Tape& tape, Tensor& table, std::span<const int> rows) {
  if (table.shape.size() != 2) throw ShapeError("embedding table must be a matrix");
  if (rows.empty()) throw ShapeError("embedding_mean over no rows");
  std::size_t dim = table.cols();
  std::vector<double> out(dim, 0.0);
  for (int r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= table.rows())
      throw ShapeError("embedding row " + std::to_string(r) + " outside table " +
                       shape_str(table.shape));
    const double* src = table.value.data() + static_cast<std::size_t>(r) * dim;
    for (std::size_t i = 0; i < dim; ++i) out[i] += src[i];
  }
  double inv = 1.0 / static_cast<double>(rows.size());
  for (double& v : out) v *= inv;
  std::vector<int> ids(rows.begin(), rows.end());
  Tensor* tp = &table;
  return tape.push({dim}, std::move(out), !table.frozen,
                   [tp, ids = std::move(ids), inv, dim](Tape& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     for (int r : ids) {
                       double* dst = tp->grad.data() + static_cast<std::size_t>(r) * dim;
                       for (std::size_t i = 0; i < dim; ++i) dst[i] += g[i] * inv;
                     }
                   });
}

Var squared_error(Var pred, double target) {
  Tape& tape = *pred.tape();
  double diff = pred.scalar() - target;
  std::size_t ip = pred.id();
  return tape.push({1}, {diff * diff}, needs(pred), [ip, diff](Tape& t, std::size_t self) {
    t.grad_of(ip)[0] += 2.0 * diff * t.node(self).grad[0];
  });
}

Var nll(Var logits, std::size_t target) {
  Tape& tape = *logits.tape();
  if (target >= logits.size())
    throw ShapeError("nll target " + std::to_string(target) + " outside " +
                     shape_str(logits.shape()));
  const auto& z = logits.value();
  double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  double loss = mx + std::log(s) - z[target];
  std::size_t il = logits.id();
  return tape.push({1}, {loss}, needs(logits), [il, target](Tape& t, std::size_t self) {
    double g = t.node(self).grad[0];
    auto p = softmax_values(t.node(il).value);
    p[target] -= 1.0;
    auto& gl = t.grad_of(il);
    for (std::size_t i = 0; i < p.size(); ++i) gl[i] += g * p[i];
  });
}

Var weighted_sum(Var weights, std::span<const Var> items) {
  if (items.empty() || weights.size() != items.size())
    throw ShapeError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(items.size()) + " items");
  Tape& tape = *weights.tape();
  std::size_t d = items.front().size();
  std::vector<double> out(d, 0.0);
  std::vector<std::size_t> ids;
  bool any = needs(weights);
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (items[k].size() != d) throw ShapeError("weighted_sum items differ in shape");
    double w = weights.value()[k];
    for (std::size_t i = 0; i < d; ++i) out[i] += w * items[k].value()[i];
    ids.push_back(items[k].id());
    any = any || needs(items[k]);
  }
  std::size_t iw = weights.id();
  return tape.push({d}, std::move(out), any,
                   [iw, ids = std::move(ids), d](Tape& t, std::size_t self) {
                     const auto& g = t.node(self).grad;
                     const auto& w = t.node(iw).value;
                     bool wg = t.node(iw).needs_grad;
                     for (std::size_t k = 0; k < ids.size(); ++k) {
                       const auto& x = t.node(ids[k]).value;
                       if (wg) {
                         double dot = 0.0;
                         for (std::size_t i = 0; i < d; ++i) dot += g[i] * x[i];
                         t.grad_of(iw)[k] += dot;
                       }
                       if (t.node(ids[k]).needs_grad) {
                         auto& gx = t.grad_of(ids[k]);
                         for (std::size_t i = 0; i < d; ++i) gx[i] += w[k] * g[i];
                       }
                     }
                   });
}

LstmCell::LstmCell(Parameters& params, const std::string& prefix, std::size_t input_dim,
                   std::size_t hidden_dim, Rng& rng, double init_bound)
    : prefix_(prefix), input_dim_(input_dim), hidden_dim_(hidden_dim) {
  const std::size_t z = input_dim + hidden_dim;
  w_input_ = &params.add_uniform(prefix + ".w_input", {hidden_dim, z}, init_bound, rng);
  w_forget_ = &params.add_uniform(prefix + ".w_forget", {hidden_dim, z}, init_bound, rng);
  w_output_ = &params.add_uniform(prefix + ".w_output", {hidden_dim, z}, init_bound, rng);
  w_cell_ = &params.add_uniform(prefix + ".w_cell", {hidden_dim, z}, init_bound, rng);
  b_input_ = &params.add_uniform(prefix + ".b_input", {hidden_dim}, init_bound, rng);
  b_forget_ = &params.add_uniform(prefix + ".b_forget", {hidden_dim}, init_bound, rng);
  b_output_ = &params.add_uniform(prefix + ".b_output", {hidden_dim}, init_bound, rng);
  b_cell_ = &params.add_uniform(prefix + ".b_cell", {hidden_dim}, init_bound, rng);
  h0_ = &params.add_uniform(prefix + ".h0", {hidden_dim}, init_bound, rng);
  c0_ = &params.add_uniform(prefix + ".c0", {hidden_dim}, init_bound, rng);
}

LstmCell::State LstmCell::initial(Tape& tape) const { return {tape.param(*h0_), tape.param(*c0_)}; }

LstmCell::State LstmCell::step(Tape& tape, Var x, const State& state) const {
  if (x.size() != input_dim_)
    throw ShapeError(prefix_ + ": lstm input " + shape_str(x.shape()) + " but cell expects [" +
                     std::to_string(input_dim_) + "]");
  Var z = concat({x, state.h});
  Var gi = sigmoid(matmul(tape.param(*w_input_), z) + tape.param(*b_input_));
  Var gf = sigmoid(matmul(tape.param(*w_forget_), z) + tape.param(*b_forget_));
  Var go = sigmoid(matmul(tape.param(*w_output_), z) + tape.param(*b_output_));
  Var gc = tanh(matmul(tape.param(*w_cell_), z) + tape.param(*b_cell_));
  Var c = gf * state.c + gi * gc;
  Var h = go * tanh(c);
  return {h, c};
}

void Adagrad::update(Parameters& params) {
  for (auto& [name, t] : params) update(name, t);
}

void Adagrad::update(const std::string& name, Tensor& t) {
  if (t.frozen) return;
  auto& acc = acc_[name];
  if (acc.size() != t.size()) acc.assign(t.size(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double g = t.grad[i];
    if (g == 0.0) continue;
    acc[i] += g * g;
    t.value[i] -= lr_ * g / (std::sqrt(acc[i]) + eps_);
  }
}

}  // namespace opinrec::nn
