#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "gpool/classifier.hpp"
#include "gpool/encoder.hpp"
#include "gpool/penalties.hpp"
#include "gpool/pooling.hpp"
#include "gpool/sequence.hpp"

namespace gpool {

struct ModelConfig {
  EncoderConfig encoder;
  PoolingKind pooling = PoolingKind::Generalized;
  std::size_t heads = 5;
  std::size_t attention_dim = 300;
  std::size_t mlp_hidden = 300;
  std::size_t num_classes = 3;
  bool pair_task = false;
  /// Test hook: copy head 0 into every other head after initialization.
  bool identical_heads = false;

  /// Width of one pooled sentence embedding (2d * I, or 2d for baselines).
  std::size_t sentence_dim() const;
  std::size_t classifier_input_dim() const;
  void validate() const;
};

/// Everything computed for one sentence during a forward pass.
struct SentenceOutput {
  HiddenSequence hidden;
  PooledEmbedding pooled;
  AttentionMaps maps;  // empty for baseline pooling
};

struct ForwardResult {
  std::vector<SentenceOutput> sentences;
  ad::Var logits;
};

/// Encoder, pooling and classifier parameters for one task.
class Model {
 public:
  Model() = default;
  static Model init(const ModelConfig& config, std::mt19937_64& rng);

  const ModelConfig& config() const { return config_; }
  EncoderParams& encoder() { return encoder_; }
  const EncoderParams& encoder() const { return encoder_; }
  PoolingParams& pooling() { return pooling_; }
  const PoolingParams& pooling() const { return pooling_; }
  const ClassifierParams& classifier() const { return classifier_; }

  /// f(name, tensor, trainable) over every tensor in a fixed order.
  template <class F>
  void visit(F&& f) {
    EncoderParams::visit(encoder_, f);
    PoolingParams::visit(pooling_, f);
    ClassifierParams::visit(classifier_, f);
  }
  template <class F>
  void visit(F&& f) const {
    EncoderParams::visit(encoder_, f);
    PoolingParams::visit(pooling_, f);
    ClassifierParams::visit(classifier_, f);
  }

  /// Zero-filled bundle keyed by the trainable parameters.
  GradientBundle zero_gradients() const;

  SentenceOutput encode(ad::Graph& g, const TokenSequence& seq,
                        std::mt19937_64* dropout_rng = nullptr) const;
  ForwardResult forward(ad::Graph& g, const Example& ex,
                        std::mt19937_64* dropout_rng = nullptr) const;

  /// Per-example penalty (attention or embedding kinds; summed over the
  /// sentences of a pair). Zero for other kinds.
  ad::Var example_penalty(ad::Graph& g, const ForwardResult& fwd, const PenaltyConfig& cfg) const;
  /// Batch-level penalty on W1^i (parameters kind); zero for other kinds.
  ad::Var parameter_penalty(ad::Graph& g, const PenaltyConfig& cfg) const;

  /// Predicted class: argmax of the logits, ties to the lowest index.
  std::size_t predict(const Example& ex) const;

 private:
  ModelConfig config_;
  EncoderParams encoder_;
  PoolingParams pooling_;
  ClassifierParams classifier_;
};

}  // namespace gpool
