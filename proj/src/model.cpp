#include "gpool/model.hpp"

#include "gpool/error.hpp"

namespace gpool {

std::size_t ModelConfig::sentence_dim() const {
  return pooling == PoolingKind::Generalized ? encoder.state_dim() * heads : encoder.state_dim();
}

std::size_t ModelConfig::classifier_input_dim() const {
  return pair_task ? 4 * sentence_dim() : sentence_dim();
}

void ModelConfig::validate() const {
  encoder.validate();
  if (heads < 1) throw ConfigError("model: heads must be at least 1");
  if (attention_dim < 1) throw ConfigError("model: attention_dim must be positive");
  if (mlp_hidden < 1) throw ConfigError("model: mlp_hidden must be positive");
  if (num_classes < 2) throw ConfigError("model: at least two classes are required");
}

Model Model::init(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  Model m;
  m.config_ = config;
  m.encoder_ = EncoderParams::init(config.encoder, rng);
  if (config.pooling == PoolingKind::Generalized) {
    m.pooling_ = PoolingParams::init(config.heads, config.encoder.state_dim(), config.attention_dim, rng);
    if (config.identical_heads)
      for (auto& head : m.pooling_.heads) head = m.pooling_.heads.front();
  }
  m.classifier_ = ClassifierParams::init(
      {config.classifier_input_dim(), config.mlp_hidden, config.num_classes}, rng);
  return m;
}

GradientBundle Model::zero_gradients() const {
  GradientBundle out;
  visit([&](const std::string& name, const Tensor& t, bool trainable) {
    if (trainable) out.emplace(name, Tensor(t.shape()));
  });
  return out;
}

SentenceOutput Model::encode(ad::Graph& g, const TokenSequence& seq,
                             std::mt19937_64* dropout_rng) const {
  SentenceOutput out{encode_sequence(g, seq, encoder_, dropout_rng), {}, {}};
  if (config_.pooling == PoolingKind::Generalized) {
    const auto heads = bind_heads(g, pooling_);
    std::tie(out.pooled, out.maps) = generalized_pool(out.hidden, heads);
  } else {
    out.pooled.v = baseline_pool(out.hidden, config_.pooling);
    out.pooled.heads = {out.pooled.v};
  }
  return out;
}

ForwardResult Model::forward(ad::Graph& g, const Example& ex, std::mt19937_64* dropout_rng) const {
  if (ex.is_pair() != config_.pair_task) {
    throw InputError(config_.pair_task ? "model expects sentence pairs" : "model expects single sentences");
  }
  ForwardResult out;
  out.sentences.push_back(encode(g, ex.sentence_a, dropout_rng));
  ad::Var features = out.sentences.front().pooled.v;
  if (ex.is_pair()) {
    out.sentences.push_back(encode(g, *ex.sentence_b, dropout_rng));
    features = pair_features(features, out.sentences.back().pooled.v);
  }
  out.logits = mlp_forward(g, features, classifier_);
  return out;
}

ad::Var Model::example_penalty(ad::Graph& g, const ForwardResult& fwd, const PenaltyConfig& cfg) const {
  ad::Var total = g.constant(Tensor::scalar(0.0));
  if (cfg.kind != PenaltyKind::Attention && cfg.kind != PenaltyKind::Embeddings) return total;
  if (config_.pooling != PoolingKind::Generalized) {
    throw ConfigError("penalty '" + to_string(cfg.kind) + "' requires generalized pooling");
  }
  for (const auto& s : fwd.sentences) {
    total = ad::add(total, cfg.kind == PenaltyKind::Attention
                               ? attention_penalty(g, s.maps.heads, cfg.lambda, cfg.mu)
                               : embedding_penalty(g, s.pooled.heads, cfg.lambda, cfg.mu));
  }
  return total;
}

ad::Var Model::parameter_penalty(ad::Graph& g, const PenaltyConfig& cfg) const {
  if (cfg.kind != PenaltyKind::Parameters) return g.constant(Tensor::scalar(0.0));
  if (config_.pooling != PoolingKind::Generalized) {
    throw ConfigError("penalty 'parameters' requires generalized pooling");
  }
  std::vector<ad::Var> w1;
  for (const auto& head : bind_heads(g, pooling_)) w1.push_back(head.w1);
  return param_penalty(g, w1, cfg.lambda, cfg.mu);
}

std::size_t Model::predict(const Example& ex) const {
  ad::Graph g;
  const auto& logits = forward(g, ex).logits.value();
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[best]) best = k;
  return best;
}

}  // namespace gpool
