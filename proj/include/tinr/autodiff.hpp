#pragma once

// Tape-based reverse-mode differentiation over dense binary64 tensors.
//
// A Graph owns its nodes in creation order. Parents are always created before
// their consumers, so walking the tape backwards from the loss is a reverse
// topological order; gradients are accumulated in that fixed order, which
// makes every backward pass bit-reproducible.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tinr/error.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

enum class OpTag {
  kLeaf,
  kMatmul,
  kAdd,
  kAddRow,
  kSub,
  kMul,
  kSin,
  kCos,
  kRelu,
  kScale,
  kSum,
  kRowSum,
  kMse,
};

inline const char* op_name(OpTag op) noexcept {
  switch (op) {
    case OpTag::kLeaf: return "leaf";
    case OpTag::kMatmul: return "matmul";
    case OpTag::kAdd: return "add";
    case OpTag::kAddRow: return "add_row";
    case OpTag::kSub: return "sub";
    case OpTag::kMul: return "mul";
    case OpTag::kSin: return "sin";
    case OpTag::kCos: return "cos";
    case OpTag::kRelu: return "relu";
    case OpTag::kScale: return "scale";
    case OpTag::kSum: return "sum";
    case OpTag::kRowSum: return "row_sum";
    case OpTag::kMse: return "mse_loss";
  }
  return "?";
}

class Graph;

/// Handle to a node in a Graph. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t index() const noexcept { return index_; }
  Graph* graph() const noexcept { return graph_; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t index) : graph_(graph), index_(index) {}

  Graph* graph_ = nullptr;
  std::size_t index_ = 0;
};

class Graph {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    OpTag op = OpTag::kLeaf;
    std::array<std::size_t, 2> parents{};
    std::size_t parent_count = 0;
    double constant = 0.0;  // scale factor for kScale
    Tensor aux;             // target for kMse, cos(input) for kSin
    bool requires_grad = false;
    bool has_grad = false;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf that does not receive a gradient (inputs, frozen parameters).
  Var constant(Tensor value) { return push_leaf(std::move(value), false); }

  /// Leaf whose gradient is populated by backward().
  Var variable(Tensor value) { return push_leaf(std::move(value), true); }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }

  const Tensor& value(const Var& v) const { return own(v).value; }

  const Tensor& grad(const Var& v) const {
    const Node& n = own(v);
    if (!n.has_grad) {
      throw ContractError(std::string("no gradient for ") + op_name(n.op) +
                          " node: it does not depend on any variable or backward() has not run");
    }
    return n.grad;
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node that requires a
  /// gradient. Nodes reached along several paths receive the sum of the path
  /// contributions. Gradients from a previous call are discarded.
  void backward(const Var& loss) {
    const Node& root = own(loss);
    if (root.value.size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
    }
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    for (std::size_t i = 0; i <= loss.index(); ++i) {
      Node& n = nodes_[i];
      if (n.requires_grad || i == loss.index()) {
        n.grad = Tensor(n.value.shape());
        n.has_grad = true;
      }
    }
    nodes_[loss.index()].grad[0] = 1.0;

    for (std::size_t i = loss.index() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || n.op == OpTag::kLeaf) continue;
      propagate(n);
    }
    for (std::size_t i = 0; i <= loss.index(); ++i) {
      if (nodes_[i].has_grad && !nodes_[i].grad.all_finite()) {
        throw NumericalError(std::string("non-finite gradient at ") + op_name(nodes_[i].op) + " node " +
                             std::to_string(i));
      }
    }
  }

 private:
  friend Var matmul(const Var&, const Var&);
  friend Var add(const Var&, const Var&);
  friend Var add_row(const Var&, const Var&);
  friend Var sub(const Var&, const Var&);
  friend Var mul(const Var&, const Var&);
  friend Var sin(const Var&);
  friend Var cos(const Var&);
  friend Var relu(const Var&);
  friend Var scale(const Var&, double);
  friend Var sum(const Var&);
  friend Var row_sum(const Var&);
  friend Var mse_loss(const Var&, const Tensor&);

  Var push_leaf(Tensor value, bool requires_grad) {
    if (!value.all_finite()) throw NumericalError("non-finite value in graph leaf");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  Var push(OpTag op, Tensor value, std::initializer_list<Var> parents, double constant = 0.0,
           Tensor aux = Tensor()) {
    if (!value.all_finite()) {
      throw NumericalError(std::string("non-finite value produced by ") + op_name(op));
    }
    Node n;
    n.value = std::move(value);
    n.op = op;
    n.constant = constant;
    n.aux = std::move(aux);
    for (const Var& p : parents) {
      n.parents[n.parent_count++] = p.index();
      n.requires_grad = n.requires_grad || nodes_[p.index()].requires_grad;
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Node& own(const Var& v) const {
    if (v.graph() != this || v.index() >= nodes_.size()) throw ContractError("variable belongs to another graph");
    return nodes_[v.index()];
  }

  Node& parent(const Node& n, std::size_t k) { return nodes_[n.parents[k]]; }

  void propagate(const Node& n) {
    const Tensor& g = n.grad;
    switch (n.op) {
      case OpTag::kLeaf:
        break;
      case OpTag::kMatmul: {
        Node& a = parent(n, 0);
        Node& b = parent(n, 1);
        if (a.requires_grad) a.grad.matrix().noalias() += g.matrix() * b.value.matrix().transpose();
        if (b.requires_grad) b.grad.matrix().noalias() += a.value.matrix().transpose() * g.matrix();
        break;
      }
      case OpTag::kAdd: {
        for (std::size_t k = 0; k < 2; ++k) {
          Node& p = parent(n, k);
          if (p.requires_grad) accumulate(p.grad, g, 1.0);
        }
        break;
      }
      case OpTag::kAddRow: {
        Node& a = parent(n, 0);
        Node& bias = parent(n, 1);
        if (a.requires_grad) accumulate(a.grad, g, 1.0);
        if (bias.requires_grad) {
          // Row-by-row accumulation keeps the summation order fixed.
          auto acc = bias.grad.array();
          const std::size_t cols = g.cols();
          for (std::size_t r = 0; r < g.rows(); ++r) {
            acc += Eigen::Map<const Eigen::ArrayXd>(g.data() + r * cols, static_cast<Eigen::Index>(cols));
          }
        }
        break;
      }
      case OpTag::kSub: {
        Node& a = parent(n, 0);
        Node& b = parent(n, 1);
        if (a.requires_grad) accumulate(a.grad, g, 1.0);
        if (b.requires_grad) accumulate(b.grad, g, -1.0);
        break;
      }
      case OpTag::kMul: {
        Node& a = parent(n, 0);
        Node& b = parent(n, 1);
        if (a.requires_grad) a.grad.array() += g.array() * b.value.array();
        if (b.requires_grad) b.grad.array() += g.array() * a.value.array();
        break;
      }
      case OpTag::kSin: {
        // aux caches cos(input) from the forward pass.
        Node& a = parent(n, 0);
        a.grad.array() += g.array() * n.aux.array();
        break;
      }
      case OpTag::kCos: {
        Node& a = parent(n, 0);
        a.grad.array() -= g.array() * a.value.array().sin();
        break;
      }
      case OpTag::kRelu: {
        Node& a = parent(n, 0);
        a.grad.array() += (a.value.array() > 0.0).select(g.array(), 0.0);
        break;
      }
      case OpTag::kScale: {
        accumulate(parent(n, 0).grad, g, n.constant);
        break;
      }
      case OpTag::kSum: {
        Node& a = parent(n, 0);
        const double s = g[0];
        a.grad.array() += s;
        break;
      }
      case OpTag::kRowSum: {
        Node& a = parent(n, 0);
        const std::size_t cols = a.value.cols();
        for (std::size_t r = 0; r < a.value.rows(); ++r) {
          for (std::size_t c = 0; c < cols; ++c) a.grad[r * cols + c] += g[r];
        }
        break;
      }
      case OpTag::kMse: {
        Node& pred = parent(n, 0);
        const double rows = static_cast<double>(pred.value.rows());
        const double s = g[0];
        pred.grad.array() += s * (2.0 * (pred.value.array() - n.aux.array()) / rows);
        break;
      }
    }
  }

  static void accumulate(Tensor& dst, const Tensor& src, double factor) {
    if (factor == 1.0) {
      dst.array() += src.array();
    } else {
      dst.array() += factor * src.array();
    }
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const {
  if (!graph_) throw ContractError("unbound variable");
  return graph_->value(*this);
}

inline const Tensor& Var::grad() const {
  if (!graph_) throw ContractError("unbound variable");
  return graph_->grad(*this);
}

namespace detail {

inline Graph& common_graph(const Var& a, const Var& b) {
  if (a.graph() == nullptr || a.graph() != b.graph()) throw ContractError("operands belong to different graphs");
  return *a.graph();
}

inline void require_rank2(const Tensor& t, const char* op, const char* which) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": " + which + " must be a matrix, got " + shape_string(t.shape()));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <class F>
Tensor map(const Tensor& a, F&& f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace detail

/// [m x k] . [k x n] -> [m x n]
inline Var matmul(const Var& a, const Var& b) {
  Graph& g = detail::common_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_rank2(av, "matmul", "left operand");
  detail::require_rank2(bv, "matmul", "right operand");
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(av.shape()) + " . " +
                         shape_string(bv.shape()));
  }
  Tensor out(Shape{av.rows(), bv.cols()});
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return g.push(OpTag::kMatmul, std::move(out), {a, b});
}

inline Var add(const Var& a, const Var& b) {
  Graph& g = detail::common_graph(a, b);
  detail::require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.value().shape());
  out.array() = a.value().array() + b.value().array();
  return g.push(OpTag::kAdd, std::move(out), {a, b});
}

/// Adds a bias row (shape [n] or [1 x n]) to every row of an [m x n] matrix.
inline Var add_row(const Var& a, const Var& bias) {
  Graph& g = detail::common_graph(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  detail::require_rank2(av, "add_row", "matrix operand");
  if (bv.rank() == 0 || bv.rows() != 1 || bv.cols() != av.cols()) {
    throw DimensionError("add_row: bias " + shape_string(bv.shape()) + " does not broadcast over rows of " +
                         shape_string(av.shape()));
  }
  Tensor out(av.shape());
  out.matrix() = av.matrix().rowwise() + bv.matrix().row(0);
  return g.push(OpTag::kAddRow, std::move(out), {a, bias});
}

inline Var sub(const Var& a, const Var& b) {
  Graph& g = detail::common_graph(a, b);
  detail::require_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.value().shape());
  out.array() = a.value().array() - b.value().array();
  return g.push(OpTag::kSub, std::move(out), {a, b});
}

/// Entrywise (Hadamard) product.
inline Var mul(const Var& a, const Var& b) {
  Graph& g = detail::common_graph(a, b);
  detail::require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.value().shape());
  out.array() = a.value().array() * b.value().array();
  return g.push(OpTag::kMul, std::move(out), {a, b});
}

inline Var sin(const Var& a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  Tensor cosines(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = std::sin(av[i]);
    cosines[i] = std::cos(av[i]);
  }
  return a.graph()->push(OpTag::kSin, std::move(out), {a}, 0.0, std::move(cosines));
}

inline Var cos(const Var& a) {
  return a.graph()->push(OpTag::kCos, detail::map(a.value(), [](double x) { return std::cos(x); }), {a});
}

inline Var relu(const Var& a) {
  Tensor out(a.value().shape());
  out.array() = a.value().array().max(0.0);
  return a.graph()->push(OpTag::kRelu, std::move(out), {a});
}

inline Var scale(const Var& a, double factor) {
  Tensor out(a.value().shape());
  out.array() = factor * a.value().array();
  return a.graph()->push(OpTag::kScale, std::move(out), {a}, factor);
}

/// Sum of all entries, as a scalar.
inline Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.graph()->push(OpTag::kSum, Tensor::scalar(s), {a});
}

/// [m x n] -> [m x 1]
inline Var row_sum(const Var& a) {
  const Tensor& av = a.value();
  detail::require_rank2(av, "row_sum", "operand");
  Tensor out(Shape{av.rows(), 1});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) s += av[r * av.cols() + c];
    out[r] = s;
  }
  return a.graph()->push(OpTag::kRowSum, std::move(out), {a});
}

/// (1/M) * sum_i ||target_i - pred_i||^2 over the M rows of an [M x c] batch.
inline Var mse_loss(const Var& pred, const Tensor& target) {
  const Tensor& pv = pred.value();
  detail::require_rank2(pv, "mse_loss", "prediction");
  detail::require_same_shape(pv, target, "mse_loss");
  if (pv.rows() == 0) throw ContractError("mse_loss: empty batch (M = 0)");
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double e = target[i] - pv[i];
    s += e * e;
  }
  return pred.graph()->push(OpTag::kMse, Tensor::scalar(s / static_cast<double>(pv.rows())), {pred}, 0.0,
                            target);
}

}  // namespace tinr
