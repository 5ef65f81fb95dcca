#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gpool/autodiff.hpp"
#include "gpool/encoder.hpp"

namespace gpool {

enum class PoolingKind { Generalized, Max, Mean, Last };

PoolingKind parse_pooling_kind(std::string_view name);
std::string to_string(PoolingKind kind);

/// Parameters of one vectorial attention head.
struct AttentionHeadParams {
  Tensor w1;  // [d_a x 2d]
  Tensor b1;  // [d_a]
  Tensor w2;  // [2d x d_a]
  Tensor b2;  // [2d]
};

struct PoolingParams {
  std::vector<AttentionHeadParams> heads;

  std::size_t num_heads() const { return heads.size(); }
  std::size_t state_dim() const { return heads.empty() ? 0 : heads.front().w1.cols(); }
  std::size_t attention_dim() const { return heads.empty() ? 0 : heads.front().w1.rows(); }

  /// Every head drawn independently (Glorot-uniform weights, zero biases).
  static PoolingParams init(std::size_t num_heads, std::size_t state_dim, std::size_t attention_dim,
                            std::mt19937_64& rng);

  static std::string name(std::size_t head, const char* part);

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    for (std::size_t i = 0; i < self.heads.size(); ++i) {
      f(name(i, "w1"), self.heads[i].w1, true);
      f(name(i, "b1"), self.heads[i].b1, true);
      f(name(i, "w2"), self.heads[i].w2, true);
      f(name(i, "b2"), self.heads[i].b2, true);
    }
  }
};

/// A head's tensors bound into a graph.
struct BoundHead {
  ad::Var w1, b1, w2, b2;
};

BoundHead bind_head(ad::Graph& g, const PoolingParams& params, std::size_t head);
std::vector<BoundHead> bind_heads(ad::Graph& g, const PoolingParams& params);

/// Per-head sentence embeddings v^i and their concatenation v.
struct PooledEmbedding {
  ad::Var v;
  std::vector<ad::Var> heads;
};

/// Per-head attention matrices A^i, each [T x 2d].
struct AttentionMaps {
  std::vector<ad::Var> heads;
};

/// A = softmax_T(W2 ReLU(W1 H^T + b1) + b2)^T, normalized over active steps
/// independently for every embedding dimension.
ad::Var head_attention(const HiddenSequence& hidden, const BoundHead& head);

/// v = sum_t a_t (.) h_t.
ad::Var pool_with_attention(ad::Var states, ad::Var attention);

/// Runs every head and concatenates v^1..v^I in head order.
std::pair<PooledEmbedding, AttentionMaps> generalized_pool(const HiddenSequence& hidden,
                                                           std::span<const BoundHead> heads);

/// Masked softmax of caller-supplied logits [2d x T] over time, then pooling.
ad::Var pool_with_logits(const HiddenSequence& hidden, ad::Var logits);

/// Max, mean or last pooling over active steps. `last` joins the forward half
/// of the final active state with the backward half of the first one.
ad::Var baseline_pool(const HiddenSequence& hidden, PoolingKind kind);

}  // namespace gpool
