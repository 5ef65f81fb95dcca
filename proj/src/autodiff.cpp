#include "gpool/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gpool/error.hpp"

namespace gpool {

double global_norm(const GradientBundle& grads) {
  double total = 0.0;
  for (const auto& [name, g] : grads) total += squared_norm(g);
  return std::sqrt(total);
}

double clip_grad_norm(GradientBundle& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw InputError("clip_grad_norm: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [name, g] : grads) g *= factor;
  }
  return norm;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  if (!(eps > 0.0)) throw InputError("finite_diff_grad: eps must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

namespace ad {

namespace {

// Masked logits are replaced by this value before max subtraction.
constexpr double kMaskedLogit = -1e30;

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(t.shape()));
  }
}

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw ContractError("operands belong to different graphs");
  return a.graph();
}

}  // namespace

UnaryKind parse_unary_kind(std::string_view name) {
  if (name == "relu") return UnaryKind::Relu;
  if (name == "tanh") return UnaryKind::Tanh;
  if (name == "sigmoid") return UnaryKind::Sigmoid;
  if (name == "abs") return UnaryKind::Abs;
  if (name == "exp") return UnaryKind::Exp;
  throw InputError("unknown unary kind '" + std::string(name) + "'");
}

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor value) {
  nodes_.push_back({OpKind::Constant, {}, std::move(value), nullptr, false, {}});
  return {this, nodes_.size() - 1};
}

Var Graph::constant_ref(const Tensor& value) {
  nodes_.push_back({OpKind::Constant, {}, Tensor(), &value, false, {}});
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) {
    if (nodes_[it->second].external != &value) {
      throw ContractError("parameter '" + name + "' bound to two different tensors");
    }
    return {this, it->second};
  }
  nodes_.push_back({OpKind::Parameter, {}, Tensor(), &value, true, {}});
  const NodeId id = nodes_.size() - 1;
  params_.emplace(name, id);
  param_order_.emplace_back(name, id);
  return {this, id};
}

Var Graph::record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  bool needs = false;
  for (auto id : inputs) needs = needs || nodes_[id].requires_grad;
  nodes_.push_back(
      {kind, std::move(inputs), std::move(value), nullptr, needs, needs ? std::move(backward) : nullptr});
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Tensor* Graph::grad_target(NodeId id) {
  if (!nodes_[id].requires_grad) return nullptr;
  if (!has_grad_[id]) {
    grads_[id] = Tensor(value(id).shape());
    has_grad_[id] = true;
  }
  return &grads_[id];
}

const Tensor* Graph::grad(NodeId id) const {
  if (id >= has_grad_.size() || !has_grad_[id]) return nullptr;
  return &grads_[id];
}

void Graph::run_backward(Var loss) {
  if (&loss.graph() != this) throw ContractError("loss belongs to a different graph");
  const Tensor& lv = value(loss.id());
  if (lv.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), false);
  if (!nodes_[loss.id()].requires_grad) return;
  grads_[loss.id()] = Tensor(lv.shape(), 1.0);
  has_grad_[loss.id()] = true;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    if (!has_grad_[id] || !nodes_[id].backward) continue;
    nodes_[id].backward(*this, grads_[id]);
  }
}

GradientBundle Graph::backward(Var loss) {
  run_backward(loss);
  GradientBundle out;
  for (const auto& [name, id] : param_order_) {
    out.emplace(name, has_grad_[id] ? grads_[id] : Tensor(value(id).shape()));
  }
  return out;
}

void Graph::backward_into(Var loss, GradientBundle& acc, double scale) {
  run_backward(loss);
  for (const auto& [name, id] : param_order_) {
    if (!has_grad_[id]) continue;
    auto it = acc.find(name);
    if (it == acc.end()) continue;
    require_same_shape(it->second, grads_[id], "backward_into");
    const auto& g = grads_[id];
    for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += scale * g[i];
  }
}

// ---------------------------------------------------------------------------
// Operations

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  Tensor out = gpool::matmul(a.value(), b.value());
  const NodeId ia = a.id(), ib = b.id();
  return g.record(OpKind::MatMul, {ia, ib}, std::move(out), [ia, ib](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_target(ia)) *da += gpool::matmul(go, gpool::transpose(g.value(ib)));
    if (Tensor* db = g.grad_target(ib)) *db += gpool::matmul(gpool::transpose(g.value(ia)), go);
  });
}

Var matvec(Var m, Var x) {
  Graph& g = same_graph(m, x);
  const Tensor& mv = m.value();
  const Tensor& xv = x.value();
  if (mv.rank() != 2 || xv.rank() != 1 || mv.cols() != xv.size()) {
    throw DimensionError("matvec: incompatible shapes " + shape_string(mv.shape()) + " and " +
                         shape_string(xv.shape()));
  }
  const std::size_t rows = mv.rows(), cols = mv.cols();
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += mv.at(r, c) * xv[c];
    out[r] = s;
  }
  const NodeId im = m.id(), ix = x.id();
  return g.record(OpKind::MatVec, {im, ix}, std::move(out),
                  [im, ix, rows, cols](Graph& g, const Tensor& go) {
                    const Tensor& mv = g.value(im);
                    const Tensor& xv = g.value(ix);
                    if (Tensor* dm = g.grad_target(im)) {
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) dm->at(r, c) += go[r] * xv[c];
                    }
                    if (Tensor* dx = g.grad_target(ix)) {
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) (*dx)[c] += mv.at(r, c) * go[r];
                    }
                  });
}

Var transpose(Var a) {
  Graph& g = a.graph();
  const NodeId ia = a.id();
  return g.record(OpKind::Transpose, {ia}, gpool::transpose(a.value()),
                  [ia](Graph& g, const Tensor& go) {
                    if (Tensor* da = g.grad_target(ia)) *da += gpool::transpose(go);
                  });
}

namespace {

template <class Fwd, class Bwd>
Var elementwise_binary(OpKind kind, Var a, Var b, const char* name, Fwd fwd, Bwd bwd) {
  Graph& g = same_graph(a, b);
  require_same_shape(a.value(), b.value(), name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  const NodeId ia = a.id(), ib = b.id();
  return g.record(kind, {ia, ib}, std::move(out), [ia, ib, bwd](Graph& g, const Tensor& go) {
    Tensor* da = g.grad_target(ia);
    Tensor* db = g.grad_target(ib);
    const Tensor& av = g.value(ia);
    const Tensor& bv = g.value(ib);
    for (std::size_t i = 0; i < go.size(); ++i) bwd(go[i], av[i], bv[i], da ? &(*da)[i] : nullptr,
                                                    db ? &(*db)[i] : nullptr);
  });
}

}  // namespace

Var add(Var a, Var b) {
  return elementwise_binary(
      OpKind::Add, a, b, "add", [](double x, double y) { return x + y; },
      [](double go, double, double, double* da, double* db) {
        if (da) *da += go;
        if (db) *db += go;
      });
}

Var sub(Var a, Var b) {
  return elementwise_binary(
      OpKind::Sub, a, b, "sub", [](double x, double y) { return x - y; },
      [](double go, double, double, double* da, double* db) {
        if (da) *da += go;
        if (db) *db -= go;
      });
}

Var mul(Var a, Var b) {
  return elementwise_binary(
      OpKind::Mul, a, b, "mul", [](double x, double y) { return x * y; },
      [](double go, double x, double y, double* da, double* db) {
        if (da) *da += go * y;
        if (db) *db += go * x;
      });
}

Var scale(Var a, double factor) {
  Graph& g = a.graph();
  Tensor out = a.value();
  out *= factor;
  const NodeId ia = a.id();
  return g.record(OpKind::Scale, {ia}, std::move(out), [ia, factor](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_target(ia))
      for (std::size_t i = 0; i < go.size(); ++i) (*da)[i] += factor * go[i];
  });
}

Var add_column_bias(Var m, Var b) {
  Graph& g = same_graph(m, b);
  const Tensor& mv = m.value();
  const Tensor& bv = b.value();
  require_rank(mv, 2, "add_column_bias");
  if (bv.rank() != 1 || bv.size() != mv.rows()) {
    throw DimensionError("add_column_bias: bias " + shape_string(bv.shape()) +
                         " does not match rows of " + shape_string(mv.shape()));
  }
  Tensor out = mv;
  const std::size_t rows = mv.rows(), cols = mv.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bv[r];
  const NodeId im = m.id(), ib = b.id();
  return g.record(OpKind::AddColumnBias, {im, ib}, std::move(out),
                  [im, ib, rows, cols](Graph& g, const Tensor& go) {
                    if (Tensor* dm = g.grad_target(im)) *dm += go;
                    if (Tensor* db = g.grad_target(ib))
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) (*db)[r] += go.at(r, c);
                  });
}

Var add_row_bias(Var m, Var b) {
  Graph& g = same_graph(m, b);
  const Tensor& mv = m.value();
  const Tensor& bv = b.value();
  require_rank(mv, 2, "add_row_bias");
  if (bv.rank() != 1 || bv.size() != mv.cols()) {
    throw DimensionError("add_row_bias: bias " + shape_string(bv.shape()) +
                         " does not match columns of " + shape_string(mv.shape()));
  }
  Tensor out = mv;
  const std::size_t rows = mv.rows(), cols = mv.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bv[c];
  const NodeId im = m.id(), ib = b.id();
  return g.record(OpKind::AddRowBias, {im, ib}, std::move(out),
                  [im, ib, rows, cols](Graph& g, const Tensor& go) {
                    if (Tensor* dm = g.grad_target(im)) *dm += go;
                    if (Tensor* db = g.grad_target(ib))
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) (*db)[c] += go.at(r, c);
                  });
}

Var unary(Var x, UnaryKind kind) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    switch (kind) {
      case UnaryKind::Relu: out[i] = v > 0.0 ? v : 0.0; break;
      case UnaryKind::Tanh: out[i] = std::tanh(v); break;
      case UnaryKind::Sigmoid: out[i] = 1.0 / (1.0 + std::exp(-v)); break;
      case UnaryKind::Abs: out[i] = std::abs(v); break;
      case UnaryKind::Exp: out[i] = std::exp(v); break;
    }
  }
  const NodeId ix = x.id();
  const NodeId iy = g.size();  // id the output node is about to receive
  return g.record(OpKind::Unary, {ix}, std::move(out), [ix, iy, kind](Graph& g, const Tensor& go) {
    Tensor* dx = g.grad_target(ix);
    if (!dx) return;
    const Tensor& xv = g.value(ix);
    const Tensor& yv = g.value(iy);
    for (std::size_t i = 0; i < go.size(); ++i) {
      double d = 0.0;
      switch (kind) {
        case UnaryKind::Relu: d = xv[i] > 0.0 ? 1.0 : 0.0; break;
        case UnaryKind::Tanh: d = 1.0 - yv[i] * yv[i]; break;
        case UnaryKind::Sigmoid: d = yv[i] * (1.0 - yv[i]); break;
        case UnaryKind::Abs: d = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0); break;
        case UnaryKind::Exp: d = yv[i]; break;
      }
      (*dx)[i] += go[i] * d;
    }
  });
}

Tensor softmax_rows(const Tensor& logits, const Tensor& mask) {
  require_rank(logits, 2, "softmax_over_time");
  const std::size_t rows = logits.rows(), steps = logits.cols();
  if (mask.rank() != 1 || mask.size() != steps) {
    throw DimensionError("softmax_over_time: mask " + shape_string(mask.shape()) +
                         " does not match logits " + shape_string(logits.shape()));
  }
  bool any_active = false;
  for (double m : mask.data()) any_active = any_active || m != 0.0;
  if (!any_active) throw DegenerateMaskError("softmax_over_time: mask has no active position");

  Tensor out({rows, steps});
  std::vector<double> shifted(steps);
  for (std::size_t r = 0; r < rows; ++r) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < steps; ++t) {
      shifted[t] = mask[t] != 0.0 ? logits.at(r, t) : kMaskedLogit;
      hi = std::max(hi, shifted[t]);
    }
    double z = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      shifted[t] = std::exp(shifted[t] - hi);
      z += shifted[t];
    }
    for (std::size_t t = 0; t < steps; ++t) out.at(r, t) = shifted[t] / z;
  }
  return out;
}

Var softmax_over_time(Var logits, const Tensor& mask) {
  Graph& g = logits.graph();
  Tensor out = softmax_rows(logits.value(), mask);
  const NodeId ix = logits.id();
  const NodeId iy = g.size();
  return g.record(OpKind::SoftmaxOverTime, {ix}, std::move(out), [ix, iy](Graph& g, const Tensor& go) {
    Tensor* dx = g.grad_target(ix);
    if (!dx) return;
    const Tensor& y = g.value(iy);
    const std::size_t rows = y.rows(), steps = y.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t t = 0; t < steps; ++t) dot += y.at(r, t) * go.at(r, t);
      for (std::size_t t = 0; t < steps; ++t) dx->at(r, t) += y.at(r, t) * (go.at(r, t) - dot);
    }
  });
}

Var sum(Var a) {
  Graph& g = a.graph();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const NodeId ia = a.id();
  return g.record(OpKind::Sum, {ia}, Tensor::scalar(s), [ia](Graph& g, const Tensor& go) {
    if (Tensor* da = g.grad_target(ia))
      for (auto& v : da->data()) v += go[0];
  });
}

Var sum_squares(Var a) {
  Graph& g = a.graph();
  const NodeId ia = a.id();
  return g.record(OpKind::SumSquares, {ia}, Tensor::scalar(squared_norm(a.value())),
                  [ia](Graph& g, const Tensor& go) {
                    Tensor* da = g.grad_target(ia);
                    if (!da) return;
                    const Tensor& av = g.value(ia);
                    for (std::size_t i = 0; i < av.size(); ++i) (*da)[i] += 2.0 * go[0] * av[i];
                  });
}

Var sum_over_rows(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  require_rank(av, 2, "sum_over_rows");
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out({cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += av.at(r, c);
  const NodeId ia = a.id();
  return g.record(OpKind::SumOverRows, {ia}, std::move(out),
                  [ia, rows, cols](Graph& g, const Tensor& go) {
                    if (Tensor* da = g.grad_target(ia))
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) da->at(r, c) += go[c];
                  });
}

Var max_over_rows(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  require_rank(av, 2, "max_over_rows");
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out({cols});
  std::vector<std::size_t> argmax(cols, 0);
  for (std::size_t c = 0; c < cols; ++c) {
    out[c] = av.at(0, c);
    for (std::size_t r = 1; r < rows; ++r) {
      if (av.at(r, c) > out[c]) {
        out[c] = av.at(r, c);
        argmax[c] = r;
      }
    }
  }
  const NodeId ia = a.id();
  return g.record(OpKind::MaxOverRows, {ia}, std::move(out),
                  [ia, argmax = std::move(argmax)](Graph& g, const Tensor& go) {
                    if (Tensor* da = g.grad_target(ia))
                      for (std::size_t c = 0; c < argmax.size(); ++c) da->at(argmax[c], c) += go[c];
                  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw InputError("concat: no parts");
  Graph& g = parts.front().graph();
  std::vector<NodeId> ids;
  std::vector<std::size_t> lengths;
  std::vector<double> data;
  for (const Var& p : parts) {
    if (&p.graph() != &g) throw ContractError("concat: parts belong to different graphs");
    require_rank(p.value(), 1, "concat");
    ids.push_back(p.id());
    lengths.push_back(p.value().size());
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  std::vector<NodeId> inputs = ids;
  return g.record(OpKind::Concat, std::move(inputs), Tensor::vector(std::move(data)),
                  [ids = std::move(ids), lengths = std::move(lengths)](Graph& g, const Tensor& go) {
                    std::size_t offset = 0;
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (Tensor* d = g.grad_target(ids[k]))
                        for (std::size_t i = 0; i < lengths[k]; ++i) (*d)[i] += go[offset + i];
                      offset += lengths[k];
                    }
                  });
}

Var slice(Var v, std::size_t offset, std::size_t length) {
  Graph& g = v.graph();
  const Tensor& vv = v.value();
  require_rank(vv, 1, "slice");
  if (length == 0 || offset + length > vv.size()) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") outside " + shape_string(vv.shape()));
  }
  std::vector<double> data(vv.data().begin() + static_cast<std::ptrdiff_t>(offset),
                           vv.data().begin() + static_cast<std::ptrdiff_t>(offset + length));
  const NodeId iv = v.id();
  return g.record(OpKind::Slice, {iv}, Tensor::vector(std::move(data)),
                  [iv, offset, length](Graph& g, const Tensor& go) {
                    if (Tensor* d = g.grad_target(iv))
                      for (std::size_t i = 0; i < length; ++i) (*d)[offset + i] += go[i];
                  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw InputError("stack_rows: no rows");
  Graph& g = rows.front().graph();
  const std::size_t width = rows.front().value().size();
  std::vector<NodeId> ids;
  std::vector<double> data;
  data.reserve(rows.size() * width);
  for (const Var& r : rows) {
    if (&r.graph() != &g) throw ContractError("stack_rows: rows belong to different graphs");
    require_rank(r.value(), 1, "stack_rows");
    if (r.value().size() != width) {
      throw DimensionError("stack_rows: row lengths differ (" + std::to_string(width) + " vs " +
                           std::to_string(r.value().size()) + ")");
    }
    ids.push_back(r.id());
    data.insert(data.end(), r.value().data().begin(), r.value().data().end());
  }
  std::vector<NodeId> inputs = ids;
  return g.record(OpKind::StackRows, std::move(inputs), Tensor({rows.size(), width}, std::move(data)),
                  [ids = std::move(ids), width](Graph& g, const Tensor& go) {
                    for (std::size_t k = 0; k < ids.size(); ++k)
                      if (Tensor* d = g.grad_target(ids[k]))
                        for (std::size_t i = 0; i < width; ++i) (*d)[i] += go.at(k, i);
                  });
}

Var row(Var m, std::size_t r) {
  Graph& g = m.graph();
  const Tensor& mv = m.value();
  require_rank(mv, 2, "row");
  if (r >= mv.rows()) throw DimensionError("row: index " + std::to_string(r) + " outside " +
                                           shape_string(mv.shape()));
  const std::size_t cols = mv.cols();
  std::vector<double> data(&mv.at(r, 0), &mv.at(r, 0) + cols);
  const NodeId im = m.id();
  return g.record(OpKind::Row, {im}, Tensor::vector(std::move(data)),
                  [im, r, cols](Graph& g, const Tensor& go) {
                    if (Tensor* d = g.grad_target(im))
                      for (std::size_t c = 0; c < cols; ++c) d->at(r, c) += go[c];
                  });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  Graph& g = table.graph();
  const Tensor& tv = table.value();
  require_rank(tv, 2, "gather_rows");
  if (ids.empty()) throw InputError("gather_rows: empty index list");
  const std::size_t cols = tv.cols();
  std::vector<double> data;
  data.reserve(ids.size() * cols);
  for (auto id : ids) {
    if (id >= tv.rows()) {
      throw InputError("gather_rows: index " + std::to_string(id) + " out of range for " +
                       std::to_string(tv.rows()) + " rows");
    }
    data.insert(data.end(), &tv.at(id, 0), &tv.at(id, 0) + cols);
  }
  const NodeId it = table.id();
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  return g.record(OpKind::GatherRows, {it}, Tensor({ids.size(), cols}, std::move(data)),
                  [it, rows = std::move(rows), cols](Graph& g, const Tensor& go) {
                    if (Tensor* d = g.grad_target(it))
                      for (std::size_t k = 0; k < rows.size(); ++k)
                        for (std::size_t c = 0; c < cols; ++c) d->at(rows[k], c) += go.at(k, c);
                  });
}

Var windows(Var m, std::size_t width) {
  Graph& g = m.graph();
  const Tensor& mv = m.value();
  require_rank(mv, 2, "windows");
  if (width == 0) throw InputError("windows: width must be positive");
  const std::size_t n = mv.rows(), c = mv.cols();
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((width - 1) / 2);
  Tensor out({n, width * c});
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < width; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p + k) - left;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      for (std::size_t j = 0; j < c; ++j) out.at(p, k * c + j) = mv.at(static_cast<std::size_t>(src), j);
    }
  }
  const NodeId im = m.id();
  return g.record(OpKind::Windows, {im}, std::move(out), [im, n, c, width, left](Graph& g, const Tensor& go) {
    Tensor* d = g.grad_target(im);
    if (!d) return;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t k = 0; k < width; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p + k) - left;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        for (std::size_t j = 0; j < c; ++j) d->at(static_cast<std::size_t>(src), j) += go.at(p, k * c + j);
      }
    }
  });
}

Var hinge(Var x, double threshold) {
  Graph& g = x.graph();
  const double gap = threshold - x.value().item();
  const bool active = gap > 0.0;
  const NodeId ix = x.id();
  return g.record(OpKind::Hinge, {ix}, Tensor::scalar(active ? gap : 0.0),
                  [ix, active](Graph& g, const Tensor& go) {
                    if (!active) return;
                    if (Tensor* d = g.grad_target(ix)) (*d)[0] -= go[0];
                  });
}

Var cross_entropy(Var logits, std::size_t label) {
  Graph& g = logits.graph();
  const Tensor& z = logits.value();
  require_rank(z, 1, "cross_entropy");
  if (label >= z.size()) {
    throw InputError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(z.size()) + ")");
  }
  const auto top = std::max_element(z.data().begin(), z.data().end());
  const double hi = *top;
  const auto arg = static_cast<std::size_t>(top - z.data().begin());
  // log sum exp(z - hi) = log1p(sum over non-maximal entries), exact near 0.
  double rest = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k)
    if (k != arg) rest += std::exp(z[k] - hi);
  const double log1p_rest = std::log1p(rest);
  const double log_z = hi + log1p_rest;
  const NodeId iz = logits.id();
  return g.record(OpKind::CrossEntropy, {iz}, Tensor::scalar(log1p_rest + (hi - z[label])),
                  [iz, label, log_z](Graph& g, const Tensor& go) {
                    Tensor* d = g.grad_target(iz);
                    if (!d) return;
                    const Tensor& z = g.value(iz);
                    for (std::size_t k = 0; k < z.size(); ++k) {
                      const double p = std::exp(z[k] - log_z);
                      (*d)[k] += go[0] * (p - (k == label ? 1.0 : 0.0));
                    }
                  });
}

Var lstm_cell(Var x, Var h, Var c, Var weight, Var bias) {
  Graph& g = x.graph();
  const Tensor& xv = x.value();
  const Tensor& hv = h.value();
  const Tensor& cv = c.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  const std::size_t n = xv.size(), d = hv.size();
  if (xv.rank() != 1 || hv.rank() != 1 || cv.shape() != hv.shape() || wv.rank() != 2 ||
      wv.rows() != 4 * d || wv.cols() != n + d || bv.rank() != 1 || bv.size() != 4 * d) {
    throw DimensionError("lstm_cell: inconsistent shapes x" + shape_string(xv.shape()) + " h" +
                         shape_string(hv.shape()) + " c" + shape_string(cv.shape()) + " W" +
                         shape_string(wv.shape()) + " b" + shape_string(bv.shape()));
  }
  // gates holds activated (i, f, g, o) followed by tanh(c').
  std::vector<double> gates(5 * d);
  for (std::size_t r = 0; r < 4 * d; ++r) {
    const double* wrow = &wv.at(r, 0);
    double z = bv[r];
    for (std::size_t k = 0; k < n; ++k) z += wrow[k] * xv[k];
    for (std::size_t k = 0; k < d; ++k) z += wrow[n + k] * hv[k];
    gates[r] = (r >= 2 * d && r < 3 * d) ? std::tanh(z) : 1.0 / (1.0 + std::exp(-z));
  }
  Tensor out({2 * d});
  for (std::size_t k = 0; k < d; ++k) {
    const double c_new = gates[d + k] * cv[k] + gates[k] * gates[2 * d + k];
    const double tc = std::tanh(c_new);
    gates[4 * d + k] = tc;
    out[k] = gates[3 * d + k] * tc;
    out[d + k] = c_new;
  }
  const NodeId ix = x.id(), ih = h.id(), ic = c.id(), iw = weight.id(), ib = bias.id();
  return g.record(
      OpKind::LstmCell, {ix, ih, ic, iw, ib}, std::move(out),
      [ix, ih, ic, iw, ib, n, d, gates = std::move(gates)](Graph& g, const Tensor& go) {
        const Tensor& xv = g.value(ix);
        const Tensor& hv = g.value(ih);
        const Tensor& cv = g.value(ic);
        const Tensor& wv = g.value(iw);
        std::vector<double> dz(4 * d);
        std::vector<double> dc_prev(d);
        for (std::size_t k = 0; k < d; ++k) {
          const double i = gates[k], f = gates[d + k], cand = gates[2 * d + k], o = gates[3 * d + k];
          const double tc = gates[4 * d + k];
          const double gh = go[k];
          const double dc = go[d + k] + gh * o * (1.0 - tc * tc);
          dz[k] = dc * cand * i * (1.0 - i);
          dz[d + k] = dc * cv[k] * f * (1.0 - f);
          dz[2 * d + k] = dc * i * (1.0 - cand * cand);
          dz[3 * d + k] = gh * tc * o * (1.0 - o);
          dc_prev[k] = dc * f;
        }
        if (Tensor* dw = g.grad_target(iw)) {
          for (std::size_t r = 0; r < 4 * d; ++r) {
            double* row = &dw->at(r, 0);
            for (std::size_t k = 0; k < n; ++k) row[k] += dz[r] * xv[k];
            for (std::size_t k = 0; k < d; ++k) row[n + k] += dz[r] * hv[k];
          }
        }
        if (Tensor* db = g.grad_target(ib))
          for (std::size_t r = 0; r < 4 * d; ++r) (*db)[r] += dz[r];
        Tensor* dx = g.grad_target(ix);
        Tensor* dh = g.grad_target(ih);
        if (dx || dh) {
          for (std::size_t r = 0; r < 4 * d; ++r) {
            const double* wrow = &wv.at(r, 0);
            if (dx)
              for (std::size_t k = 0; k < n; ++k) (*dx)[k] += wrow[k] * dz[r];
            if (dh)
              for (std::size_t k = 0; k < d; ++k) (*dh)[k] += wrow[n + k] * dz[r];
          }
        }
        if (Tensor* dc = g.grad_target(ic))
          for (std::size_t k = 0; k < d; ++k) (*dc)[k] += dc_prev[k];
      });
}

}  // namespace ad
}  // namespace gpool
