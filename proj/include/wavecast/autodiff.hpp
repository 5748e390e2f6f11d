#pragma once

// Tape-based reverse-mode automatic differentiation over dense 64-bit tensors.
//
// A Graph records every operation in creation order, which is a topological
// order by construction; backward() walks it once in reverse. Parameters live
// outside the graph and receive their adjoints by accumulation, so several
// graphs (one per sample) can feed the same gradient buffers in sequence.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wavecast/error.hpp"

namespace wavecast::ad {

/// Tensor dimensions, rank <= 4, stored inline.
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) {
    if (dims.size() > kMaxRank) throw Error(Errc::ShapeMismatch, "rank above 4");
    for (auto d : dims) dims_[rank_++] = d;
  }
  /// Rank-`rank` shape with all extents zero.
  explicit Shape(std::size_t rank) {
    if (rank > kMaxRank) throw Error(Errc::ShapeMismatch, "rank above 4");
    rank_ = static_cast<std::uint8_t>(rank);
  }

  std::size_t size() const { return rank_; }
  bool empty() const { return rank_ == 0; }
  std::size_t& operator[](std::size_t i) { return dims_[i]; }
  std::size_t operator[](std::size_t i) const { return dims_[i]; }
  std::size_t* begin() { return dims_.data(); }
  std::size_t* end() { return dims_.data() + rank_; }
  const std::size_t* begin() const { return dims_.data(); }
  const std::size_t* end() const { return dims_.data() + rank_; }

  friend bool operator==(const Shape& a, const Shape& b) {
    return a.rank_ == b.rank_ && std::equal(a.begin(), a.end(), b.begin());
  }

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::uint8_t rank_ = 0;
};

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

struct Tensor {
  Shape shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (numel(shape) != values.size()) {
      throw Error(Errc::ShapeMismatch, "shape " + shape_str(shape) + " does not hold " +
                                           std::to_string(values.size()) + " values");
    }
  }

  static Tensor zeros(Shape s) {
    const auto n = numel(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  static Tensor vector(std::vector<double> v) {
    const auto n = v.size();
    return Tensor({n}, std::move(v));
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// A trainable (or frozen) tensor with its accumulated gradient.
struct Parameter {
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  explicit Parameter(Tensor v, bool train = true)
      : value(std::move(v)), grad(Tensor::zeros(value.shape)), trainable(train) {}

  void zero_grad() { std::fill(grad.values.begin(), grad.values.end(), 0.0); }
};

enum class Op : std::uint8_t {
  Constant,
  Input,
  Param,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Concat,
  Slice,
  Sigmoid,
  Tanh,
  Relu,
  Sum,
  Mse,
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Data that never needs a gradient.
  Var constant(Tensor t) { return leaf(Op::Constant, std::move(t), false); }
  Var constant(std::vector<double> v) { return constant(Tensor::vector(std::move(v))); }

  /// A leaf whose gradient is kept and can be read back with gradient().
  Var input(Tensor t) { return leaf(Op::Input, std::move(t), true); }

  /// Parameter leaf; repeated calls with the same parameter reuse one node.
  Var param(Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    Node n;
    n.op = Op::Param;
    n.shape = p.value.shape;
    n.param = &p;
    n.requires_grad = p.trainable && !no_grad_;
    const auto id = push(std::move(n));
    param_nodes_.emplace(&p, id);
    return {this, id};
  }

  /// Disable gradient bookkeeping for parameters created afterwards (inference).
  void set_no_grad(bool on) { no_grad_ = on; }

  const Shape& shape(Var v) const { return nodes_[v.id].shape; }
  std::span<const double> value(Var v) const {
    const auto& n = nodes_[v.id];
    return {data(n), numel(n.shape)};
  }
  Tensor tensor(Var v) const {
    auto s = value(v);
    return Tensor(shape(v), std::vector<double>(s.begin(), s.end()));
  }
  double scalar(Var v) const { return value(v)[0]; }

  /// Adjoint of an Input node after backward(); zeros if it never received one.
  Tensor gradient(Var v) const {
    const auto& n = nodes_[v.id];
    if (n.param) return n.param->grad;
    if (n.grad.empty()) return Tensor::zeros(n.shape);
    return Tensor(n.shape, n.grad);
  }

  std::size_t size() const { return nodes_.size(); }

  // Node construction used by the free-function operators below.
  Var emit(Op op, Shape shape, std::vector<double> out, std::uint32_t a, std::int64_t b = -1,
           std::size_t aux = 0, double scalar = 0.0) {
    Node n;
    n.op = op;
    n.shape = std::move(shape);
    n.own = std::move(out);
    n.a = static_cast<std::int64_t>(a);
    n.b = b;
    n.aux = aux;
    n.scalar = scalar;
    n.requires_grad = nodes_[a].requires_grad || (b >= 0 && nodes_[static_cast<std::size_t>(b)].requires_grad);
#ifndef NDEBUG
    for (double x : n.own) assert(std::isfinite(x) && "non-finite value produced by autodiff op");
#endif
    return {this, push(std::move(n))};
  }

  /// Reverse sweep from a scalar loss; parameter adjoints are accumulated.
  void backward(Var loss) {
    auto& root = nodes_[loss.id];
    if (numel(root.shape) != 1) {
      throw Error(Errc::NonScalarLoss, "loss has shape " + shape_str(root.shape));
    }
    if (!root.requires_grad) return;
    grad_buffer(loss.id)[0] += 1.0;
    for (std::int64_t id = loss.id; id >= 0; --id) {
      auto& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.requires_grad || n.op == Op::Param || n.op == Op::Input || n.op == Op::Constant) continue;
      if (n.grad.empty()) continue;  // no path to the loss
      propagate(static_cast<std::uint32_t>(id));
    }
  }

 private:
  struct Node {
    Op op = Op::Constant;
    Shape shape;
    std::vector<double> own;
    std::vector<double> grad;
    Parameter* param = nullptr;
    std::int64_t a = -1;
    std::int64_t b = -1;
    std::size_t aux = 0;
    double scalar = 0.0;
    bool requires_grad = false;
  };

  static const double* data(const Node& n) { return n.param ? n.param->value.values.data() : n.own.data(); }

  Var leaf(Op op, Tensor t, bool requires_grad) {
    Node n;
    n.op = op;
    n.shape = std::move(t.shape);
    n.own = std::move(t.values);
    n.requires_grad = requires_grad;
    return {this, push(std::move(n))};
  }

  std::uint32_t push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  double* grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.param) {
      if (n.param->grad.values.size() != numel(n.shape)) n.param->grad = Tensor::zeros(n.shape);
      return n.param->grad.values.data();
    }
    if (n.grad.empty()) n.grad.assign(numel(n.shape), 0.0);
    return n.grad.data();
  }

  void propagate(std::uint32_t id) {
    const Node& n = nodes_[id];
    const double* g = n.grad.data();
    const double* y = n.own.data();
    const std::size_t len = numel(n.shape);
    const auto a = static_cast<std::size_t>(n.a);
    const bool ga = n.a >= 0 && nodes_[a].requires_grad;
    const bool gb = n.b >= 0 && nodes_[static_cast<std::size_t>(n.b)].requires_grad;
    const auto b = static_cast<std::size_t>(n.b < 0 ? 0 : n.b);

    switch (n.op) {
      case Op::MatMul: {
        const auto& A = nodes_[a];
        const auto& B = nodes_[b];
        const std::size_t m = A.shape[0], k = A.shape[1];
        const std::size_t p = B.shape.size() == 1 ? 1 : B.shape[1];
        const double* Av = data(A);
        const double* Bv = data(B);
        if (p == 1) {
          if (ga) {
            double* dA = grad_buffer(a);
            for (std::size_t r = 0; r < m; ++r) {
              const double gr = g[r];
              if (gr == 0.0) continue;
              double* row = dA + r * k;
              for (std::size_t q = 0; q < k; ++q) row[q] += gr * Bv[q];
            }
          }
          if (gb) {
            double* dB = grad_buffer(b);
            for (std::size_t r = 0; r < m; ++r) {
              const double gr = g[r];
              if (gr == 0.0) continue;
              const double* Arow = Av + r * k;
              for (std::size_t q = 0; q < k; ++q) dB[q] += Arow[q] * gr;
            }
          }
          break;
        }
        if (ga) {
          double* dA = grad_buffer(a);
          for (std::size_t r = 0; r < m; ++r) {
            double* row = dA + r * k;
            for (std::size_t c = 0; c < p; ++c) {
              const double gr = g[r * p + c];
              if (gr == 0.0) continue;
              for (std::size_t q = 0; q < k; ++q) row[q] += gr * Bv[q * p + c];
            }
          }
        }
        if (gb) {
          double* dB = grad_buffer(b);
          for (std::size_t r = 0; r < m; ++r) {
            const double* Arow = Av + r * k;
            for (std::size_t c = 0; c < p; ++c) {
              const double gr = g[r * p + c];
              if (gr == 0.0) continue;
              for (std::size_t q = 0; q < k; ++q) dB[q * p + c] += Arow[q] * gr;
            }
          }
        }
        break;
      }
      case Op::Add:
        if (ga) accumulate(grad_buffer(a), g, len, 1.0);
        if (gb) accumulate(grad_buffer(b), g, len, 1.0);
        break;
      case Op::Sub:
        if (ga) accumulate(grad_buffer(a), g, len, 1.0);
        if (gb) accumulate(grad_buffer(b), g, len, -1.0);
        break;
      case Op::Mul: {
        const double* av = data(nodes_[a]);
        const double* bv = data(nodes_[b]);
        if (ga) {
          double* da = grad_buffer(a);
          for (std::size_t i = 0; i < len; ++i) da[i] += g[i] * bv[i];
        }
        if (gb) {
          double* db = grad_buffer(b);
          for (std::size_t i = 0; i < len; ++i) db[i] += g[i] * av[i];
        }
        break;
      }
      case Op::Scale:
        if (ga) accumulate(grad_buffer(a), g, len, n.scalar);
        break;
      case Op::Concat: {
        const std::size_t na = numel(nodes_[a].shape);
        if (ga) accumulate(grad_buffer(a), g, na, 1.0);
        if (gb) accumulate(grad_buffer(b), g + na, len - na, 1.0);
        break;
      }
      case Op::Slice:
        if (ga) accumulate(grad_buffer(a) + n.aux, g, len, 1.0);
        break;
      case Op::Sigmoid:
        if (ga) {
          double* da = grad_buffer(a);
          for (std::size_t i = 0; i < len; ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
        }
        break;
      case Op::Tanh:
        if (ga) {
          double* da = grad_buffer(a);
          for (std::size_t i = 0; i < len; ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
        }
        break;
      case Op::Relu:
        if (ga) {
          double* da = grad_buffer(a);
          for (std::size_t i = 0; i < len; ++i) da[i] += y[i] > 0.0 ? g[i] : 0.0;
        }
        break;
      case Op::Sum:
        if (ga) {
          double* da = grad_buffer(a);
          const std::size_t na = numel(nodes_[a].shape);
          for (std::size_t i = 0; i < na; ++i) da[i] += g[0];
        }
        break;
      case Op::Mse: {
        const double* av = data(nodes_[a]);
        const double* bv = data(nodes_[b]);
        const std::size_t na = numel(nodes_[a].shape);
        const double scale = 2.0 * g[0] / static_cast<double>(na);
        if (ga) {
          double* da = grad_buffer(a);
          for (std::size_t i = 0; i < na; ++i) da[i] += scale * (av[i] - bv[i]);
        }
        if (gb) {
          double* db = grad_buffer(b);
          for (std::size_t i = 0; i < na; ++i) db[i] -= scale * (av[i] - bv[i]);
        }
        break;
      }
      case Op::Constant:
      case Op::Input:
      case Op::Param:
        break;
    }
  }

  static void accumulate(double* dst, const double* src, std::size_t n, double scale) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += scale * src[i];
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
  bool no_grad_ = false;
};

// ---------------------------------------------------------------------------
// Operators

namespace detail {

inline Graph& same_graph(Var a, Var b) {
  if (a.graph != b.graph || a.graph == nullptr) throw Error(Errc::ShapeMismatch, "operands from different graphs");
  return *a.graph;
}

inline void require_same_shape(const Graph& g, Var a, Var b, const char* op) {
  if (g.shape(a) != g.shape(b)) {
    throw Error(Errc::ShapeMismatch,
                std::string(op) + ": " + shape_str(g.shape(a)) + " vs " + shape_str(g.shape(b)));
  }
}

template <class F>
Var unary(Var a, Op op, F&& f) {
  Graph& g = *a.graph;
  auto x = g.value(a);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return g.emit(op, g.shape(a), std::move(out), a.id);
}

}  // namespace detail

/// (m x k) times (k) -> (m), or (m x k) times (k x p) -> (m x p).
inline Var matmul(Var A, Var B) {
  Graph& g = detail::same_graph(A, B);
  const auto& sa = g.shape(A);
  const auto& sb = g.shape(B);
  if (sa.size() != 2 || sb.empty() || sb.size() > 2 || sb[0] != sa[1]) {
    throw Error(Errc::ShapeMismatch, "matmul: " + shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1];
  const std::size_t p = sb.size() == 1 ? 1 : sb[1];
  auto av = g.value(A);
  auto bv = g.value(B);
  std::vector<double> out(m * p, 0.0);
  if (p == 1) {
    for (std::size_t r = 0; r < m; ++r) {
      const double* row = av.data() + r * k;
      // four interleaved partial sums; fixed order keeps results reproducible
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t q = 0;
      for (; q + 4 <= k; q += 4) {
        acc[0] += row[q] * bv[q];
        acc[1] += row[q + 1] * bv[q + 1];
        acc[2] += row[q + 2] * bv[q + 2];
        acc[3] += row[q + 3] * bv[q + 3];
      }
      for (; q < k; ++q) acc[0] += row[q] * bv[q];
      out[r] = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    }
  } else {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t q = 0; q < k; ++q) {
        const double arq = av[r * k + q];
        for (std::size_t c = 0; c < p; ++c) out[r * p + c] += arq * bv[q * p + c];
      }
    }
  }
  Shape shape = sb.size() == 1 ? Shape{m} : Shape{m, p};
  return g.emit(Op::MatMul, std::move(shape), std::move(out), A.id, B.id);
}

inline Var add(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  detail::require_same_shape(g, a, b, "add");
  auto x = g.value(a);
  auto y = g.value(b);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return g.emit(Op::Add, g.shape(a), std::move(out), a.id, b.id);
}

inline Var sub(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  detail::require_same_shape(g, a, b, "sub");
  auto x = g.value(a);
  auto y = g.value(b);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return g.emit(Op::Sub, g.shape(a), std::move(out), a.id, b.id);
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  detail::require_same_shape(g, a, b, "mul");
  auto x = g.value(a);
  auto y = g.value(b);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return g.emit(Op::Mul, g.shape(a), std::move(out), a.id, b.id);
}

inline Var scale(Var a, double s) {
  Graph& g = *a.graph;
  auto x = g.value(a);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  return g.emit(Op::Scale, g.shape(a), std::move(out), a.id, -1, 0, s);
}

/// Concatenate two vectors.
inline Var concat(Var a, Var b) {
  Graph& g = detail::same_graph(a, b);
  if (g.shape(a).size() != 1 || g.shape(b).size() != 1) {
    throw Error(Errc::ShapeMismatch, "concat expects vectors, got " + shape_str(g.shape(a)) + " and " +
                                         shape_str(g.shape(b)));
  }
  auto x = g.value(a);
  auto y = g.value(b);
  std::vector<double> out;
  out.reserve(x.size() + y.size());
  out.insert(out.end(), x.begin(), x.end());
  out.insert(out.end(), y.begin(), y.end());
  const auto n = out.size();
  return g.emit(Op::Concat, {n}, std::move(out), a.id, b.id);
}

/// Contiguous sub-vector [offset, offset + len).
inline Var slice(Var a, std::size_t offset, std::size_t len) {
  Graph& g = *a.graph;
  const auto& s = g.shape(a);
  if (s.size() != 1 || offset + len > s[0]) {
    throw Error(Errc::ShapeMismatch, "slice [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                                         ") of " + shape_str(s));
  }
  auto x = g.value(a);
  std::vector<double> out(x.begin() + static_cast<long>(offset), x.begin() + static_cast<long>(offset + len));
  return g.emit(Op::Slice, {len}, std::move(out), a.id, -1, offset);
}

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) { return detail::unary(a, Op::Sigmoid, sigmoid_value); }
inline Var tanh(Var a) { return detail::unary(a, Op::Tanh, [](double x) { return std::tanh(x); }); }
inline Var relu(Var a) { return detail::unary(a, Op::Relu, [](double x) { return x > 0.0 ? x : 0.0; }); }

inline Var sum(Var a) {
  Graph& g = *a.graph;
  auto x = g.value(a);
  double acc = 0.0;
  for (double v : x) acc += v;
  return g.emit(Op::Sum, {1}, {acc}, a.id);
}

/// Mean squared error between equally shaped tensors, as a scalar.
inline Var mse(Var pred, Var target) {
  Graph& g = detail::same_graph(pred, target);
  detail::require_same_shape(g, pred, target, "mse");
  auto x = g.value(pred);
  auto y = g.value(target);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return g.emit(Op::Mse, {1}, {acc / static_cast<double>(x.size())}, pred.id, target.id);
}

}  // namespace wavecast::ad
