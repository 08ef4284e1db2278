/*
 * Copyright 2026 The BotUmc Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "botumc/errors.hpp"
#include "botumc/tensor.hpp"

/**
 * Reverse-mode differentiation over dense tensors.
 *
 * A Tape records every forward op as a node holding its value and a closure
 * that pushes the node's gradient into its inputs. Node ids are assigned in
 * creation order, so the id order is a topological order and backward simply
 * walks ids downwards from the root. One tape per training step; tapes are
 * single-threaded.
 */
namespace botumc::ad {

enum class OpKind {
  kLeaf,
  kConstant,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddScalar,
  kSquare,
  kLeakyRelu,
  kSoftplus,
  kExp,
  kLog,
  kSoftmaxRows,
  kLogSoftmaxRows,
  kSum,
  kMean,
  kRowSum,
  kColumn,
  kClampMax,
  kSelectRows,
  kConcatCols,
  kAggregate,
  kRowwiseKl,
  kCrossEntropy,
};

std::string_view op_name(OpKind kind);

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
};

// Compressed in-neighbour lists: sources of node i are
// sources[offsets[i] .. offsets[i+1]).
struct Adjacency {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> sources;

  std::size_t node_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t degree(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad;
    BackwardFn backward;
  };

  Var leaf(Tensor value) { return push(OpKind::kLeaf, {}, std::move(value), true, nullptr); }
  Var constant(Tensor value) {
    return push(OpKind::kConstant, {}, std::move(value), false, nullptr);
  }

  // Records an op. Non-finite forward values are a numeric failure.
  Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn fn) {
    if (!value.all_finite()) {
      fail<NumericError>("non-finite output from op '", op_name(kind), "'");
    }
    bool req = false;
    for (auto in : inputs) req = req || nodes_[in].requires_grad;
    return push(kind, std::move(inputs), std::move(value), req, req ? std::move(fn) : nullptr);
  }

  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  // Gradient accumulator for input `id`, or nullptr when it needs none.
  Tensor* grad_sink(std::size_t id) {
    auto& n = nodes_[id];
    return n.requires_grad ? &n.grad : nullptr;
  }

  // Populates d(root)/d(node) for every node recorded up to the root.
  // Gradients accumulate across fan-out.
  void backward(Var root) {
    if (root.tape != this) fail<ContractError>("backward root belongs to another tape");
    const auto& rv = nodes_[root.id].value;
    if (rv.size() != 1) {
      fail<ContractError>("backward needs a scalar root, got shape ", shape_str(rv.shape()));
    }
    for (std::size_t i = 0; i <= root.id; ++i) nodes_[i].grad = Tensor(nodes_[i].value.shape());
    nodes_[root.id].grad[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
  }

 private:
  Var push(OpKind kind, std::vector<std::size_t> inputs, Tensor value, bool req, BackwardFn fn) {
    nodes_.push_back(Node{kind, std::move(inputs), std::move(value), Tensor(), req, std::move(fn)});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }
inline const Tensor& Var::grad() const { return tape->grad(*this); }

inline std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kSquare: return "square";
    case OpKind::kLeakyRelu: return "leaky_relu";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kLogSoftmaxRows: return "log_softmax_rows";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kColumn: return "column";
    case OpKind::kClampMax: return "clamp_max";
    case OpKind::kSelectRows: return "select_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kAggregate: return "aggregate";
    case OpKind::kRowwiseKl: return "rowwise_kl";
    case OpKind::kCrossEntropy: return "cross_entropy";
  }
  return "unknown";
}

namespace detail {

inline void same_tape(Var a, Var b) {
  if (a.tape != b.tape) fail<ContractError>("operands live on different tapes");
}

inline void require_matrix(const Tensor& t, std::string_view op) {
  if (t.rank() != 2) {
    fail<DimensionError>(op, " expects a rank-2 tensor, got ", shape_str(t.shape()));
  }
}

// Operand-to-output index map for the three supported broadcasts:
// identical shapes, an [n,1] column against [n,m], and a single value.
struct Broadcast {
  enum Mode { kFull, kColumn, kScalar } mode;
  std::size_t cols;

  std::size_t map(std::size_t i) const {
    switch (mode) {
      case kFull: return i;
      case kColumn: return i / cols;
      case kScalar: return 0;
    }
    return 0;
  }
};

inline Shape broadcast_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.size() == 1) return a.shape();
  if (a.size() == 1) return b.shape();
  if (a.rank() == 2 && b.rank() == 2 && a.rows() == b.rows()) {
    if (b.cols() == 1) return a.shape();
    if (a.cols() == 1) return b.shape();
  }
  fail<DimensionError>(op, ": shapes ", shape_str(a.shape()), " and ", shape_str(b.shape()),
                       " do not broadcast");
}

inline Broadcast broadcast_of(const Tensor& operand, const Shape& out) {
  if (operand.shape() == out) return {Broadcast::kFull, 1};
  if (operand.size() == 1) return {Broadcast::kScalar, 1};
  return {Broadcast::kColumn, out.size() == 2 ? out[1] : 1};
}

// Elementwise binary op with analytic partials da(x,y), db(x,y).
template <typename F, typename DA, typename DB>
Var binary(OpKind kind, Var a, Var b, F f, DA da, DB db) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape out_shape = broadcast_shape(av, bv, op_name(kind));
  Broadcast ba = broadcast_of(av, out_shape);
  Broadcast bb = broadcast_of(bv, out_shape);
  Tensor out(out_shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[ba.map(i)], bv[bb.map(i)]);
  return a.tape->record(kind, {a.id, b.id}, std::move(out),
                        [ba, bb, da, db](Tape& t, std::size_t self) {
                          const auto& n = t.node(self);
                          const Tensor& x = t.node(n.inputs[0]).value;
                          const Tensor& y = t.node(n.inputs[1]).value;
                          Tensor* gx = t.grad_sink(n.inputs[0]);
                          Tensor* gy = t.grad_sink(n.inputs[1]);
                          for (std::size_t i = 0; i < n.grad.size(); ++i) {
                            double xv = x[ba.map(i)], yv = y[bb.map(i)];
                            if (gx) (*gx)[ba.map(i)] += n.grad[i] * da(xv, yv);
                            if (gy) (*gy)[bb.map(i)] += n.grad[i] * db(xv, yv);
                          }
                        });
}

// Elementwise unary op; the derivative sees the input and the output.
template <typename F, typename D>
Var unary(OpKind kind, Var a, F f, D d) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  return a.tape->record(kind, {a.id}, std::move(out), [d](Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    const Tensor& x = t.node(n.inputs[0]).value;
    Tensor* gx = t.grad_sink(n.inputs[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) (*gx)[i] += n.grad[i] * d(x[i], n.value[i]);
  });
}

inline double softplus_value(double x) {
  // log(1 + e^x) without overflow.
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---- arithmetic ------------------------------------------------------------

inline Var add(Var a, Var b) {
  return detail::binary(
      OpKind::kAdd, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::binary(
      OpKind::kSub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::binary(
      OpKind::kMul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Var div(Var a, Var b) {
  for (double v : b.value().values()) {
    if (v == 0.0) fail<DomainError>("div: zero divisor");
  }
  return detail::binary(
      OpKind::kDiv, a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

inline Var scale(Var a, double c) {
  return detail::unary(
      OpKind::kScale, a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var add_scalar(Var a, double c) {
  return detail::unary(
      OpKind::kAddScalar, a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline Var square(Var a) {
  return detail::unary(
      OpKind::kSquare, a, [](double x) { return x * x; }, [](double x, double) { return 2 * x; });
}

// y = min(x, ceiling); the gradient is cut where the clamp is active.
inline Var clamp_max(Var a, double ceiling) {
  return detail::unary(
      OpKind::kClampMax, a, [ceiling](double x) { return std::min(x, ceiling); },
      [ceiling](double x, double) { return x < ceiling ? 1.0 : 0.0; });
}

// x[n,k] @ w[k,m].
inline Var matmul(Var x, Var w) {
  detail::same_tape(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  detail::require_matrix(xv, "matmul");
  detail::require_matrix(wv, "matmul");
  if (xv.cols() != wv.rows()) {
    fail<DimensionError>("matmul: shapes ", shape_str(xv.shape()), " and ",
                         shape_str(wv.shape()), " do not conform");
  }
  const std::size_t n = xv.rows(), k = xv.cols(), m = wv.cols();
  Tensor out({n, m});
  {
    const double* X = xv.data().data();
    const double* W = wv.data().data();
    double* Y = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
      double* yrow = Y + i * m;
      for (std::size_t p = 0; p < k; ++p) {
        const double a = X[i * k + p];
        if (a == 0.0) continue;
        const double* wrow = W + p * m;
        for (std::size_t j = 0; j < m; ++j) yrow[j] += a * wrow[j];
      }
    }
  }
  return x.tape->record(OpKind::kMatmul, {x.id, w.id}, std::move(out),
                        [n, k, m](Tape& t, std::size_t self) {
                          const auto& node = t.node(self);
                          const Tensor& xv = t.node(node.inputs[0]).value;
                          const Tensor& wv = t.node(node.inputs[1]).value;
                          const double* G = node.grad.data().data();
                          const double* X = xv.data().data();
                          const double* W = wv.data().data();
                          if (Tensor* gx = t.grad_sink(node.inputs[0])) {
                            double* GX = gx->data().data();
                            for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                double s = 0.0;
                                for (std::size_t j = 0; j < m; ++j) s += G[i * m + j] * W[p * m + j];
                                GX[i * k + p] += s;
                              }
                          }
                          if (Tensor* gw = t.grad_sink(node.inputs[1])) {
                            double* GW = gw->data().data();
                            for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                const double a = X[i * k + p];
                                if (a == 0.0) continue;
                                for (std::size_t j = 0; j < m; ++j) GW[p * m + j] += a * G[i * m + j];
                              }
                          }
                        });
}

// Row-wise bias add: x[n,m] + b[m].
inline Var add_bias(Var x, Var b) {
  detail::same_tape(x, b);
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  detail::require_matrix(xv, "add_bias");
  if (bv.size() != xv.cols()) {
    fail<DimensionError>("add_bias: shapes ", shape_str(xv.shape()), " and ",
                         shape_str(bv.shape()), " do not conform");
  }
  Tensor out = xv;
  const std::size_t m = xv.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % m];
  return x.tape->record(OpKind::kAdd, {x.id, b.id}, std::move(out), [m](Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    if (Tensor* gx = t.grad_sink(n.inputs[0])) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*gx)[i] += n.grad[i];
    }
    if (Tensor* gb = t.grad_sink(n.inputs[1])) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*gb)[i % m] += n.grad[i];
    }
  });
}

// y = x W + b.
inline Var linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

// ---- activations -----------------------------------------------------------

inline Var leaky_relu(Var a, double slope) {
  return detail::unary(
      OpKind::kLeakyRelu, a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

inline Var softplus(Var a) {
  return detail::unary(OpKind::kSoftplus, a, detail::softplus_value,
                       [](double x, double) { return detail::sigmoid(x); });
}

inline Var exp(Var a) {
  return detail::unary(
      OpKind::kExp, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) fail<DomainError>("log of nonpositive value ", v);
  }
  return detail::unary(
      OpKind::kLog, a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

namespace detail {

inline Tensor softmax_rows_value(const Tensor& x, bool log_space) {
  Tensor out(x.shape());
  const std::size_t n = x.rows(), m = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(x(i, j) - mx);
    double lz = std::log(z);
    for (std::size_t j = 0; j < m; ++j) {
      double lp = x(i, j) - mx - lz;
      out(i, j) = log_space ? lp : std::exp(lp);
    }
  }
  return out;
}

}  // namespace detail

inline Var softmax_rows(Var a) {
  Tensor out = detail::softmax_rows_value(a.value(), false);
  return a.tape->record(OpKind::kSoftmaxRows, {a.id}, std::move(out), [](Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    Tensor* gx = t.grad_sink(n.inputs[0]);
    const Tensor& y = n.value;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += n.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) (*gx)(i, j) += y(i, j) * (n.grad(i, j) - dot);
    }
  });
}

inline Var log_softmax_rows(Var a) {
  Tensor out = detail::softmax_rows_value(a.value(), true);
  return a.tape->record(OpKind::kLogSoftmaxRows, {a.id}, std::move(out),
                        [](Tape& t, std::size_t self) {
                          const auto& n = t.node(self);
                          Tensor* gx = t.grad_sink(n.inputs[0]);
                          const Tensor& y = n.value;
                          for (std::size_t i = 0; i < y.rows(); ++i) {
                            double gs = 0.0;
                            for (std::size_t j = 0; j < y.cols(); ++j) gs += n.grad(i, j);
                            for (std::size_t j = 0; j < y.cols(); ++j)
                              (*gx)(i, j) += n.grad(i, j) - std::exp(y(i, j)) * gs;
                          }
                        });
}

enum class Activation { kLeakyRelu, kSoftplus, kExp, kLog, kSoftmaxRows, kIdentity };

inline Var activation(Activation kind, Var x, double slope = 0.01) {
  switch (kind) {
    case Activation::kLeakyRelu: return leaky_relu(x, slope);
    case Activation::kSoftplus: return softplus(x);
    case Activation::kExp: return exp(x);
    case Activation::kLog: return log(x);
    case Activation::kSoftmaxRows: return softmax_rows(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

// ---- reductions and reshaping ---------------------------------------------

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(OpKind::kSum, {a.id}, Tensor::scalar(s), [](Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    Tensor* gx = t.grad_sink(n.inputs[0]);
    for (double& g : gx->values()) g += n.grad[0];
  });
}

inline Var mean(Var a) {
  const double count = static_cast<double>(a.value().size());
  if (count == 0) fail<ContractError>("mean of empty tensor");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(OpKind::kMean, {a.id}, Tensor::scalar(s / count),
                        [count](Tape& t, std::size_t self) {
                          const auto& n = t.node(self);
                          Tensor* gx = t.grad_sink(n.inputs[0]);
                          for (double& g : gx->values()) g += n.grad[0] / count;
                        });
}

// [n,m] -> [n,1].
inline Var row_sum(Var a) {
  const Tensor& x = a.value();
  detail::require_matrix(x, "row_sum");
  Tensor out({x.rows(), 1});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out[i] += x(i, j);
  return a.tape->record(OpKind::kRowSum, {a.id}, std::move(out), [](Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    Tensor* gx = t.grad_sink(n.inputs[0]);
    for (std::size_t i = 0; i < gx->rows(); ++i)
      for (std::size_t j = 0; j < gx->cols(); ++j) (*gx)(i, j) += n.grad[i];
  });
}

// Column j of [n,m] as [n,1].
inline Var column(Var a, std::size_t j) {
  const Tensor& x = a.value();
  detail::require_matrix(x, "column");
  if (j >= x.cols()) fail<DimensionError>("column ", j, " out of range for ", shape_str(x.shape()));
  Tensor out({x.rows(), 1});
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = x(i, j);
  return a.tape->record(OpKind::kColumn, {a.id}, std::move(out), [j](Tape& t, std::size_t self) {
    const auto& n = t.node(self);
    Tensor* gx = t.grad_sink(n.inputs[0]);
    for (std::size_t i = 0; i < gx->rows(); ++i) (*gx)(i, j) += n.grad[i];
  });
}

inline Var select_rows(Var a, std::vector<std::size_t> rows) {
  const Tensor& x = a.value();
  detail::require_matrix(x, "select_rows");
  const std::size_t m = x.cols();
  Tensor out({rows.size(), m});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) fail<DimensionError>("select_rows: row ", rows[r], " out of range");
    for (std::size_t j = 0; j < m; ++j) out(r, j) = x(rows[r], j);
  }
  return a.tape->record(OpKind::kSelectRows, {a.id}, std::move(out),
                        [rows = std::move(rows), m](Tape& t, std::size_t self) {
                          const auto& n = t.node(self);
                          Tensor* gx = t.grad_sink(n.inputs[0]);
                          for (std::size_t r = 0; r < rows.size(); ++r)
                            for (std::size_t j = 0; j < m; ++j) (*gx)(rows[r], j) += n.grad(r, j);
                        });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) fail<ContractError>("concat_cols of nothing");
  const std::size_t n = parts[0].value().rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    detail::same_tape(parts[0], p);
    detail::require_matrix(p.value(), "concat_cols");
    if (p.value().rows() != n) {
      fail<DimensionError>("concat_cols: row mismatch ", shape_str(parts[0].shape()), " vs ",
                           shape_str(p.shape()));
    }
    widths.push_back(p.value().cols());
    ids.push_back(p.id);
    total += widths.back();
  }
  Tensor out({n, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out(i, off + j) = v(i, j);
    off += widths[k];
  }
  return parts[0].tape->record(OpKind::kConcatCols, std::move(ids), std::move(out),
                               [widths](Tape& t, std::size_t self) {
                                 const auto& node = t.node(self);
                                 std::size_t off = 0;
                                 for (std::size_t k = 0; k < widths.size(); ++k) {
                                   if (Tensor* g = t.grad_sink(node.inputs[k])) {
                                     for (std::size_t i = 0; i < g->rows(); ++i)
                                       for (std::size_t j = 0; j < widths[k]; ++j)
                                         (*g)(i, j) += node.grad(i, off + j);
                                   }
                                   off += widths[k];
                                 }
                               });
}

// Mean over in-neighbours: row i = (1/|N(i)|) sum_{j in N(i)} x_j, and zero
// when N(i) is empty.
inline Var aggregate(Var a, std::shared_ptr<const Adjacency> adj) {
  const Tensor& x = a.value();
  detail::require_matrix(x, "aggregate");
  if (adj->node_count() != x.rows()) {
    fail<DimensionError>("aggregate: adjacency over ", adj->node_count(), " nodes, features ",
                         shape_str(x.shape()));
  }
  const std::size_t m = x.cols();
  Tensor out(x.shape());
  const double* X = x.data().data();
  double* Y = out.data().data();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::size_t deg = adj->degree(i);
    if (deg == 0) continue;
    const double w = 1.0 / static_cast<double>(deg);
    for (std::size_t e = adj->offsets[i]; e < adj->offsets[i + 1]; ++e) {
      const double* xj = X + adj->sources[e] * m;
      for (std::size_t c = 0; c < m; ++c) Y[i * m + c] += w * xj[c];
    }
  }
  return a.tape->record(OpKind::kAggregate, {a.id}, std::move(out),
                        [adj, m](Tape& t, std::size_t self) {
                          const auto& n = t.node(self);
                          double* GX = t.grad_sink(n.inputs[0])->data().data();
                          const double* G = n.grad.data().data();
                          for (std::size_t i = 0; i < adj->node_count(); ++i) {
                            const std::size_t deg = adj->degree(i);
                            if (deg == 0) continue;
                            const double w = 1.0 / static_cast<double>(deg);
                            for (std::size_t e = adj->offsets[i]; e < adj->offsets[i + 1]; ++e) {
                              double* gj = GX + adj->sources[e] * m;
                              for (std::size_t c = 0; c < m; ++c) gj[c] += w * G[i * m + c];
                            }
                          }
                        });
}

// ---- losses ----------------------------------------------------------------

inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

inline void check_stochastic_rows(const Tensor& p, std::string_view what) {
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      if (p(i, j) < 0.0) fail<ValidationError>(what, " row ", i, " has a negative entry");
      s += p(i, j);
    }
    if (std::abs(s - 1.0) > 1e-9) fail<ValidationError>(what, " row ", i, " sums to ", s);
  }
}

}  // namespace detail

// Per-row KL(p || q) as [n,1]. Uses 0 log 0 = 0 and clamps q below at 1e-12.
inline Var rowwise_kl(Var p, Var q) {
  detail::same_tape(p, q);
  const Tensor& pv = p.value();
  const Tensor& qv = q.value();
  detail::require_matrix(pv, "rowwise_kl");
  if (pv.shape() != qv.shape()) {
    fail<DimensionError>("rowwise_kl: shapes ", shape_str(pv.shape()), " and ",
                         shape_str(qv.shape()), " differ");
  }
  detail::check_stochastic_rows(pv, "kl: p");
  detail::check_stochastic_rows(qv, "kl: q");
  Tensor out({pv.rows(), 1});
  for (std::size_t i = 0; i < pv.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < pv.cols(); ++k) {
      double pk = pv(i, k);
      if (pk > 0.0) s += pk * std::log(pk / std::max(qv(i, k), kProbabilityFloor));
    }
    out[i] = s;
  }
  return p.tape->record(OpKind::kRowwiseKl, {p.id, q.id}, std::move(out),
                        [](Tape& t, std::size_t self) {
                          const auto& n = t.node(self);
                          const Tensor& pv = t.node(n.inputs[0]).value;
                          const Tensor& qv = t.node(n.inputs[1]).value;
                          Tensor* gp = t.grad_sink(n.inputs[0]);
                          Tensor* gq = t.grad_sink(n.inputs[1]);
                          for (std::size_t i = 0; i < pv.rows(); ++i) {
                            for (std::size_t k = 0; k < pv.cols(); ++k) {
                              double pk = std::max(pv(i, k), kProbabilityFloor);
                              double qk = qv(i, k);
                              double qc = std::max(qk, kProbabilityFloor);
                              if (gp) (*gp)(i, k) += n.grad[i] * (std::log(pk / qc) + 1.0);
                              if (gq && qk > kProbabilityFloor)
                                (*gq)(i, k) -= n.grad[i] * pv(i, k) / qk;
                            }
                          }
                        });
}

// Mean over rows of KL(p || q).
inline Var categorical_kl(Var p, Var q) { return mean(rowwise_kl(p, q)); }

// Mean negative log-likelihood of integer class labels under softmax(logits).
inline Var cross_entropy(Var logits, std::vector<int> labels) {
  const Tensor& z = logits.value();
  detail::require_matrix(z, "cross_entropy");
  if (labels.size() != z.rows()) {
    fail<DimensionError>("cross_entropy: ", labels.size(), " labels for logits ",
                         shape_str(z.shape()));
  }
  if (labels.empty()) fail<ContractError>("cross_entropy over zero rows");
  Tensor logp = detail::softmax_rows_value(z, true);
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= z.cols()) {
      fail<ValidationError>("cross_entropy: label ", labels[i], " out of range at row ", i);
    }
    s -= logp(i, labels[i]);
  }
  const double n = static_cast<double>(labels.size());
  return logits.tape->record(
      OpKind::kCrossEntropy, {logits.id}, Tensor::scalar(s / n),
      [labels = std::move(labels), logp = std::move(logp), n](Tape& t, std::size_t self) {
        const auto& node = t.node(self);
        Tensor* gz = t.grad_sink(node.inputs[0]);
        const double g = node.grad[0] / n;
        for (std::size_t i = 0; i < logp.rows(); ++i)
          for (std::size_t k = 0; k < logp.cols(); ++k) {
            double target = static_cast<int>(k) == labels[i] ? 1.0 : 0.0;
            (*gz)(i, k) += g * (std::exp(logp(i, k)) - target);
          }
      });
}

// ---- value-level helpers --------------------------------------------------

// Evaluates a tape-built function on constant inputs and returns its value.
template <typename F>
Tensor evaluate(F&& f, std::vector<Tensor> inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (auto& in : inputs) vars.push_back(tape.constant(std::move(in)));
  return f(tape, vars).value();
}

inline Tensor softmax_rows(const Tensor& x) { return detail::softmax_rows_value(x, false); }

inline double categorical_kl(const Tensor& p, const Tensor& q) {
  return evaluate([](Tape&, std::vector<Var>& v) { return categorical_kl(v[0], v[1]); }, {p, q})
      .item();
}

}  // namespace botumc::ad
