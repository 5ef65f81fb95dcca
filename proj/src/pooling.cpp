#include "gpool/pooling.hpp"

#include "gpool/error.hpp"

namespace gpool {

PoolingKind parse_pooling_kind(std::string_view name) {
  if (name == "generalized") return PoolingKind::Generalized;
  if (name == "max") return PoolingKind::Max;
  if (name == "mean") return PoolingKind::Mean;
  if (name == "last") return PoolingKind::Last;
  throw InputError("unknown pooling kind '" + std::string(name) + "'");
}

std::string to_string(PoolingKind kind) {
  switch (kind) {
    case PoolingKind::Generalized: return "generalized";
    case PoolingKind::Max: return "max";
    case PoolingKind::Mean: return "mean";
    case PoolingKind::Last: return "last";
  }
  return "?";
}

PoolingParams PoolingParams::init(std::size_t num_heads, std::size_t state_dim,
                                  std::size_t attention_dim, std::mt19937_64& rng) {
  if (num_heads < 1) throw ConfigError("pooling: at least one head is required");
  if (state_dim < 1 || attention_dim < 1) throw ConfigError("pooling: dimensions must be positive");
  PoolingParams p;
  for (std::size_t i = 0; i < num_heads; ++i) {
    p.heads.push_back({glorot_uniform(attention_dim, state_dim, rng), Tensor({attention_dim}),
                       glorot_uniform(state_dim, attention_dim, rng), Tensor({state_dim})});
  }
  return p;
}

std::string PoolingParams::name(std::size_t head, const char* part) {
  return "pool.head" + std::to_string(head) + "." + part;
}

BoundHead bind_head(ad::Graph& g, const PoolingParams& params, std::size_t head) {
  const auto& h = params.heads.at(head);
  return {g.parameter(PoolingParams::name(head, "w1"), h.w1),
          g.parameter(PoolingParams::name(head, "b1"), h.b1),
          g.parameter(PoolingParams::name(head, "w2"), h.w2),
          g.parameter(PoolingParams::name(head, "b2"), h.b2)};
}

std::vector<BoundHead> bind_heads(ad::Graph& g, const PoolingParams& params) {
  std::vector<BoundHead> out;
  for (std::size_t i = 0; i < params.num_heads(); ++i) out.push_back(bind_head(g, params, i));
  return out;
}

ad::Var head_attention(const HiddenSequence& hidden, const BoundHead& head) {
  const auto& h = hidden.states.value();
  if (h.rank() != 2 || head.w1.value().rank() != 2 || head.w1.value().cols() != h.cols() ||
      head.w2.value().rows() != h.cols()) {
    throw DimensionError("head_attention: head shapes W1" + shape_string(head.w1.shape()) + " W2" +
                         shape_string(head.w2.shape()) + " do not fit H" + shape_string(h.shape()));
  }
  auto hidden_t = ad::transpose(hidden.states);                                       // [2d x T]
  auto z = ad::relu(ad::add_column_bias(ad::matmul(head.w1, hidden_t), head.b1));      // [d_a x T]
  auto logits = ad::add_column_bias(ad::matmul(head.w2, z), head.b2);                  // [2d x T]
  return ad::transpose(ad::softmax_over_time(logits, hidden.mask));                    // [T x 2d]
}

ad::Var pool_with_attention(ad::Var states, ad::Var attention) {
  if (states.shape() != attention.shape()) {
    throw DimensionError("pool_with_attention: H" + shape_string(states.shape()) + " vs A" +
                         shape_string(attention.shape()));
  }
  return ad::sum_over_rows(ad::mul(attention, states));
}

std::pair<PooledEmbedding, AttentionMaps> generalized_pool(const HiddenSequence& hidden,
                                                           std::span<const BoundHead> heads) {
  if (heads.empty()) throw InputError("generalized_pool: no heads");
  PooledEmbedding pooled;
  AttentionMaps maps;
  for (const auto& head : heads) {
    auto a = head_attention(hidden, head);
    maps.heads.push_back(a);
    pooled.heads.push_back(pool_with_attention(hidden.states, a));
  }
  pooled.v = pooled.heads.size() == 1 ? pooled.heads.front() : ad::concat(pooled.heads);
  return {std::move(pooled), std::move(maps)};
}

ad::Var pool_with_logits(const HiddenSequence& hidden, ad::Var logits) {
  const auto& h = hidden.states.value();
  if (logits.value().rank() != 2 || logits.value().rows() != h.cols() ||
      logits.value().cols() != h.rows()) {
    throw DimensionError("pool_with_logits: logits" + shape_string(logits.shape()) +
                         " must be the transpose shape of H" + shape_string(h.shape()));
  }
  auto a = ad::transpose(ad::softmax_over_time(logits, hidden.mask));
  return pool_with_attention(hidden.states, a);
}

ad::Var baseline_pool(const HiddenSequence& hidden, PoolingKind kind) {
  const auto& h = hidden.states.value();
  if (hidden.mask.size() != h.rows()) {
    throw DimensionError("baseline_pool: mask" + shape_string(hidden.mask.shape()) +
                         " does not match H" + shape_string(h.shape()));
  }
  std::vector<std::size_t> active;
  for (std::size_t t = 0; t < hidden.mask.size(); ++t)
    if (hidden.mask[t] != 0.0) active.push_back(t);
  if (active.empty()) throw DegenerateMaskError("baseline_pool: mask has no active position");

  switch (kind) {
    case PoolingKind::Max:
      return ad::max_over_rows(ad::gather_rows(hidden.states, active));
    case PoolingKind::Mean:
      return ad::scale(ad::sum_over_rows(ad::gather_rows(hidden.states, active)),
                       1.0 / static_cast<double>(active.size()));
    case PoolingKind::Last: {
      if (h.cols() % 2 != 0) throw DimensionError("baseline_pool: last pooling needs an even width");
      const std::size_t d = h.cols() / 2;
      const ad::Var parts[] = {ad::slice(ad::row(hidden.states, active.back()), 0, d),
                               ad::slice(ad::row(hidden.states, active.front()), d, d)};
      return ad::concat(parts);
    }
    case PoolingKind::Generalized:
      break;
  }
  throw InputError("baseline_pool: generalized pooling needs attention parameters");
}

}  // namespace gpool
