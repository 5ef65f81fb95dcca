#include "gpool/encoder.hpp"

#include <cmath>

#include "gpool/error.hpp"

namespace gpool {

void EncoderConfig::validate() const {
  if (vocab_size < 1) throw ConfigError("encoder: vocab_size must be positive");
  if (word_dim < 1) throw ConfigError("encoder: word_dim must be positive");
  if (hidden < 1) throw ConfigError("encoder: hidden must be positive");
  if (layers < 1) throw ConfigError("encoder: layers must be at least 1");
  if (char_maps > 0) {
    if (char_dim < 1) throw ConfigError("encoder: char_dim must be positive");
    if (alphabet_size < 1) throw ConfigError("encoder: alphabet_size must be positive");
    if (char_widths.empty()) throw ConfigError("encoder: char_widths must not be empty");
    for (auto w : char_widths)
      if (w < 1) throw ConfigError("encoder: char widths must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0, 1)");
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-r, r);
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = u(rng);
  return t;
}

std::string EncoderParams::lstm_name(std::size_t layer, std::size_t direction, const char* part) {
  return "encoder.layer" + std::to_string(layer) + (direction == 0 ? ".fwd." : ".bwd.") + part;
}

EncoderParams EncoderParams::init(const EncoderConfig& config, std::mt19937_64& rng) {
  config.validate();
  EncoderParams p;
  p.config = config;

  p.word_table = Tensor({config.vocab_size, config.word_dim});
  std::normal_distribution<double> gauss(0.0, 0.1);
  for (std::size_t r = 1; r < config.vocab_size; ++r)
    for (std::size_t c = 0; c < config.word_dim; ++c) p.word_table.at(r, c) = gauss(rng);

  if (config.char_maps > 0) {
    p.char_table = glorot_uniform(config.alphabet_size, config.char_dim, rng);
    for (std::size_t c = 0; c < config.char_dim; ++c) p.char_table.at(0, c) = 0.0;
    for (auto width : config.char_widths) {
      p.filters.push_back({width, glorot_uniform(width * config.char_dim, config.char_maps, rng),
                           Tensor({config.char_maps})});
    }
  }

  const std::size_t d = config.hidden;
  for (std::size_t l = 0; l < config.layers; ++l) {
    std::array<LstmParams, 2> dirs;
    for (auto& lstm : dirs) {
      lstm.weight = glorot_uniform(4 * d, config.layer_input_dim(l) + d, rng);
      lstm.bias = Tensor({4 * d});
      for (std::size_t k = d; k < 2 * d; ++k) lstm.bias[k] = 1.0;
    }
    p.layers.push_back(std::move(dirs));
  }
  return p;
}

ad::Var bind(ad::Graph& g, const std::string& name, const Tensor& value, bool trainable) {
  return trainable ? g.parameter(name, value) : g.constant_ref(value);
}

ad::Var char_cnn_embed(ad::Graph& g, std::span<const std::size_t> char_ids,
                       const EncoderParams& params) {
  if (char_ids.empty()) throw InputError("char_cnn_embed: word has no characters");
  const auto& cfg = params.config;
  if (cfg.char_maps == 0) throw InputError("char_cnn_embed: character composition is disabled");
  for (auto c : char_ids) {
    if (c >= cfg.alphabet_size) {
      throw InputError("char_cnn_embed: character id " + std::to_string(c) +
                       " outside alphabet of size " + std::to_string(cfg.alphabet_size));
    }
  }
  auto chars = ad::gather_rows(g.parameter("encoder.char_table", params.char_table), char_ids);
  std::vector<ad::Var> pooled;
  for (const auto& filter : params.filters) {
    const std::string base = "encoder.char_conv" + std::to_string(filter.width);
    auto conv = ad::matmul(ad::windows(chars, filter.width), g.parameter(base + ".weight", filter.weight));
    conv = ad::add_row_bias(conv, g.parameter(base + ".bias", filter.bias));
    pooled.push_back(ad::max_over_rows(conv));
  }
  return ad::concat(pooled);
}

ad::Var embed_token(ad::Graph& g, std::size_t token, std::optional<ad::Var> char_vec,
                    const EncoderParams& params) {
  if (token >= params.config.vocab_size) {
    throw InputError("embed_token: token id " + std::to_string(token) + " outside vocabulary of size " +
                     std::to_string(params.config.vocab_size));
  }
  auto table = bind(g, "encoder.word_table", params.word_table, params.config.train_embeddings);
  const std::size_t ids[] = {token};
  auto word = ad::row(ad::gather_rows(table, ids), 0);
  if (!char_vec) return word;
  const ad::Var parts[] = {word, *char_vec};
  return ad::concat(parts);
}

std::pair<ad::Var, ad::Var> lstm_step(ad::Var x, ad::Var h_prev, ad::Var c_prev, ad::Var weight,
                                      ad::Var bias) {
  const std::size_t d = h_prev.value().size();
  auto hc = ad::lstm_cell(x, h_prev, c_prev, weight, bias);
  return {ad::slice(hc, 0, d), ad::slice(hc, d, d)};
}

namespace {

ad::Var apply_dropout(ad::Var x, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.shape());
  for (auto& m : mask.data()) m = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return ad::mul(x, x.graph().constant(std::move(mask)));
}

}  // namespace

HiddenSequence encode_sequence(ad::Graph& g, const TokenSequence& seq, const EncoderParams& params,
                               std::mt19937_64* dropout_rng) {
  const auto& cfg = params.config;
  const std::size_t steps = seq.length();
  if (steps == 0) throw InputError("encode_sequence: empty sequence");
  if (cfg.char_maps > 0 && seq.char_ids.size() != steps) {
    throw InputError("encode_sequence: " + std::to_string(seq.char_ids.size()) +
                     " character lists for " + std::to_string(steps) + " tokens");
  }

  std::vector<ad::Var> embedded;
  embedded.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    std::optional<ad::Var> chars;
    if (cfg.char_maps > 0) chars = char_cnn_embed(g, seq.char_ids[t], params);
    auto e = embed_token(g, seq.token_ids[t], chars, params);
    if (dropout_rng && cfg.dropout > 0.0) e = apply_dropout(e, cfg.dropout, *dropout_rng);
    embedded.push_back(e);
  }

  const std::size_t d = cfg.hidden;
  const Tensor zeros({d});
  std::vector<ad::Var> below;  // previous layer states [fwd; bwd] per step
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::array<std::vector<ad::Var>, 2> states;
    for (std::size_t dir = 0; dir < 2; ++dir) {
      auto weight = g.parameter(EncoderParams::lstm_name(l, dir, "weight"), params.layers[l][dir].weight);
      auto bias = g.parameter(EncoderParams::lstm_name(l, dir, "bias"), params.layers[l][dir].bias);
      auto h = g.constant(zeros);
      auto c = g.constant(zeros);
      states[dir].resize(steps);
      for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t t = dir == 0 ? k : steps - 1 - k;
        ad::Var input = embedded[t];
        if (l > 0) {
          const ad::Var parts[] = {embedded[t], below[t]};
          input = ad::concat(parts);
        }
        std::tie(h, c) = lstm_step(input, h, c, weight, bias);
        states[dir][t] = h;
      }
    }
    below.clear();
    for (std::size_t t = 0; t < steps; ++t) {
      const ad::Var parts[] = {states[0][t], states[1][t]};
      below.push_back(ad::concat(parts));
    }
  }
  return {ad::stack_rows(below), Tensor({steps}, 1.0)};
}

}  // namespace gpool
