#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gpool/autodiff.hpp"
#include "gpool/sequence.hpp"
#include "gpool/tensor.hpp"

namespace gpool {

struct EncoderConfig {
  std::size_t vocab_size = 2;
  std::size_t word_dim = 300;
  std::size_t alphabet_size = 2;
  std::size_t char_dim = 15;
  std::vector<std::size_t> char_widths{1, 3, 5};
  /// Feature maps per filter width; 0 disables character composition.
  std::size_t char_maps = 100;
  /// Hidden size of each LSTM direction (d).
  std::size_t hidden = 300;
  std::size_t layers = 1;
  bool train_embeddings = true;
  /// Inverted dropout on word representations during training only.
  double dropout = 0.0;

  std::size_t char_output_dim() const { return char_maps ? char_widths.size() * char_maps : 0; }
  /// d_e: word embedding plus character composition.
  std::size_t embed_dim() const { return word_dim + char_output_dim(); }
  std::size_t state_dim() const { return 2 * hidden; }
  /// Input width of a layer: d_e for the bottom layer, d_e + 2d above it.
  std::size_t layer_input_dim(std::size_t layer) const {
    return layer == 0 ? embed_dim() : embed_dim() + state_dim();
  }
  void validate() const;
};

struct LstmParams {
  Tensor weight;  // [4d x (input + d)], gate rows ordered i, f, g, o
  Tensor bias;    // [4d]
};

struct CharFilter {
  std::size_t width = 1;
  Tensor weight;  // [width * char_dim x maps]
  Tensor bias;    // [maps]
};

/// All learnable encoder tensors. Direction 0 is forward, 1 is backward.
struct EncoderParams {
  EncoderConfig config;
  Tensor word_table;  // [|V| x word_dim], row 0 is padding
  Tensor char_table;  // [alphabet x char_dim]
  std::vector<CharFilter> filters;
  std::vector<std::array<LstmParams, 2>> layers;

  /// Glorot-uniform weights, zero biases with forget-gate bias 1, word rows
  /// drawn from N(0, 0.1^2) with a zero padding row.
  static EncoderParams init(const EncoderConfig& config, std::mt19937_64& rng);

  /// Calls f(name, tensor, trainable) for every tensor in a fixed order.
  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(std::string("encoder.word_table"), self.word_table, self.config.train_embeddings);
    if (self.config.char_maps == 0) return visit_layers(self, f);
    f(std::string("encoder.char_table"), self.char_table, true);
    for (auto& filter : self.filters) {
      const std::string base = "encoder.char_conv" + std::to_string(filter.width);
      f(base + ".weight", filter.weight, true);
      f(base + ".bias", filter.bias, true);
    }
    visit_layers(self, f);
  }

  static std::string lstm_name(std::size_t layer, std::size_t direction, const char* part);

 private:
  template <class Self, class F>
  static void visit_layers(Self& self, F& f) {
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      for (std::size_t dir = 0; dir < 2; ++dir) {
        f(lstm_name(l, dir, "weight"), self.layers[l][dir].weight, true);
        f(lstm_name(l, dir, "bias"), self.layers[l][dir].bias, true);
      }
    }
  }
};

/// Top-layer hidden states H [T x 2d] with the active-position mask [T].
struct HiddenSequence {
  ad::Var states;
  Tensor mask;

  std::size_t steps() const { return mask.size(); }
};

/// Binds a tensor as a named parameter when trainable, else as a constant.
ad::Var bind(ad::Graph& g, const std::string& name, const Tensor& value, bool trainable = true);

/// Character CNN: per filter width a same-padded convolution over the
/// character embeddings followed by max over positions; widths concatenated.
ad::Var char_cnn_embed(ad::Graph& g, std::span<const std::size_t> char_ids,
                       const EncoderParams& params);

/// [pretrained word vector; character vector].
ad::Var embed_token(ad::Graph& g, std::size_t token, std::optional<ad::Var> char_vec,
                    const EncoderParams& params);

/// One LSTM step; returns (h, c).
std::pair<ad::Var, ad::Var> lstm_step(ad::Var x, ad::Var h_prev, ad::Var c_prev, ad::Var weight,
                                      ad::Var bias);

/// Embeds every token and runs the stacked shortcut BiLSTM, returning the
/// top layer. Dropout is applied only when `dropout_rng` is given.
HiddenSequence encode_sequence(ad::Graph& g, const TokenSequence& seq, const EncoderParams& params,
                               std::mt19937_64* dropout_rng = nullptr);

/// Glorot-uniform matrix of the given shape.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

}  // namespace gpool
