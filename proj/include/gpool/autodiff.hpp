#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gpool/tensor.hpp"

namespace gpool {

/// Gradients keyed by parameter name.
using GradientBundle = std::map<std::string, Tensor>;

/// Global L2 norm over every tensor in the bundle.
double global_norm(const GradientBundle& grads);

/// Rescales all gradients by max_norm / g when the global norm g exceeds
/// max_norm. Returns the norm measured before clipping.
double clip_grad_norm(GradientBundle& grads, double max_norm);

/// Central-difference gradient of a scalar function at x.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps);

namespace ad {

using NodeId = std::size_t;

enum class OpKind {
  Constant,
  Parameter,
  MatMul,
  MatVec,
  Transpose,
  Add,
  Sub,
  Mul,
  Scale,
  AddColumnBias,
  AddRowBias,
  Unary,
  SoftmaxOverTime,
  Sum,
  SumSquares,
  SumOverRows,
  MaxOverRows,
  Concat,
  Slice,
  StackRows,
  Row,
  GatherRows,
  Windows,
  Hinge,
  CrossEntropy,
  LstmCell,
};

enum class UnaryKind { Relu, Tanh, Sigmoid, Abs, Exp };

/// Parses "relu", "tanh", "sigmoid", "abs" or "exp"; InputError otherwise.
UnaryKind parse_unary_kind(std::string_view name);

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  const Tensor& value() const;
  const Tensor::Shape& shape() const { return value().shape(); }
  NodeId id() const { return id_; }
  Graph& graph() const { return *graph_; }

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

/// Tape of differentiable operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction. Parameter leaves reference tensors owned by the
/// caller, which must outlive the graph. A graph is single-writer.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Non-owning constant leaf; `value` must outlive the graph.
  Var constant_ref(const Tensor& value);
  Var constant_ref(Tensor&&) = delete;
  /// Named trainable leaf. Binding the same name twice returns the same node,
  /// so repeated uses accumulate into one gradient.
  Var parameter(const std::string& name, const Tensor& value);
  Var parameter(const std::string&, Tensor&&) = delete;

  Var record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(NodeId id) const;
  OpKind kind(NodeId id) const { return nodes_[id].kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_[id].inputs; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator for an input during backward; nullptr when the
  /// node does not depend on any parameter.
  Tensor* grad_target(NodeId id);

  /// Runs reverse accumulation from a single-element loss and returns the
  /// gradient of every bound parameter (zeros for unused ones).
  GradientBundle backward(Var loss);

  /// Same as backward(), adding scale * gradient into `acc` for every
  /// parameter whose name is present in `acc`.
  void backward_into(Var loss, GradientBundle& acc, double scale = 1.0);

  /// Gradient of any node after backward(); nullptr if none reached it.
  const Tensor* grad(NodeId id) const;

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor owned;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void run_backward(Var loss);

  std::deque<Node> nodes_;  // stable references across push_back
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
  std::unordered_map<std::string, NodeId> params_;
  std::vector<std::pair<std::string, NodeId>> param_order_;
};

Var matmul(Var a, Var b);
/// Matrix [m x k] times vector [k] -> [m].
Var matvec(Var m, Var x);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

/// m [R x C] plus b [R] replicated across columns.
Var add_column_bias(Var m, Var b);
/// m [R x C] plus b [C] replicated across rows.
Var add_row_bias(Var m, Var b);

Var unary(Var x, UnaryKind kind);
inline Var relu(Var x) { return unary(x, UnaryKind::Relu); }
inline Var tanh(Var x) { return unary(x, UnaryKind::Tanh); }
inline Var sigmoid(Var x) { return unary(x, UnaryKind::Sigmoid); }
inline Var abs(Var x) { return unary(x, UnaryKind::Abs); }
inline Var exp(Var x) { return unary(x, UnaryKind::Exp); }

/// Row-wise softmax of logits [R x T] over the T axis. Positions with
/// mask[t] == 0 get exactly zero weight. Throws DegenerateMaskError when no
/// position is active.
Var softmax_over_time(Var logits, const Tensor& mask);

Var sum(Var a);
/// Sum of squared entries.
Var sum_squares(Var a);
/// [R x C] -> [C], summing over rows.
Var sum_over_rows(Var a);
/// [R x C] -> [C], per-column maximum (gradient routed to the first argmax).
Var max_over_rows(Var a);

/// Concatenates rank-1 tensors.
Var concat(std::span<const Var> parts);
Var slice(Var v, std::size_t offset, std::size_t length);
/// Stacks rank-1 tensors of equal length into a matrix.
Var stack_rows(std::span<const Var> rows);
Var row(Var m, std::size_t r);
Var gather_rows(Var table, std::span<const std::size_t> ids);

/// Same-padded sliding windows: [n x c] -> [n x width*c], row p holding the
/// flattened rows p-left .. p-left+width-1 with left = (width-1)/2 and zeros
/// outside the input.
Var windows(Var m, std::size_t width);

/// max(threshold - x, 0) for a single-element x; subgradient 0 at the kink.
Var hinge(Var x, double threshold);

/// -log softmax(logits)[label] for logits [K].
Var cross_entropy(Var logits, std::size_t label);

/// Fused LSTM cell with gate order (input, forget, candidate, output):
/// z = W [x; h] + b, returns [h'; c'] of length 2d.
Var lstm_cell(Var x, Var h, Var c, Var weight, Var bias);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

/// Plain evaluation of the masked softmax, shared with the graph op.
Tensor softmax_rows(const Tensor& logits, const Tensor& mask);

}  // namespace ad
}  // namespace gpool
