#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gpool/encoder.hpp"
#include "gpool/error.hpp"
#include "gpool/gradcheck.hpp"

using namespace gpool;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.vocab_size = 7;
  c.word_dim = 3;
  c.alphabet_size = 6;
  c.char_dim = 2;
  c.char_widths = {1, 3};
  c.char_maps = 2;
  c.hidden = 3;
  c.layers = 2;
  return c;
}

TokenSequence make_sequence(std::vector<std::size_t> tokens, std::size_t alphabet) {
  TokenSequence s;
  s.token_ids = tokens;
  for (auto t : tokens) {
    std::vector<std::size_t> chars;
    for (std::size_t k = 0; k <= t % 3; ++k) chars.push_back(1 + (t + k) % (alphabet - 1));
    s.char_ids.push_back(chars);
  }
  return s;
}

}  // namespace

TEST(CharCnn, DefaultWidthsGiveThreeHundredDims) {
  EncoderConfig c;
  c.vocab_size = 4;
  c.alphabet_size = 10;
  c.word_dim = 2;
  c.hidden = 1;
  std::mt19937_64 rng(1);
  auto p = EncoderParams::init(c, rng);
  ad::Graph g;
  const std::size_t chars[] = {3, 4, 5, 6};
  EXPECT_EQ(char_cnn_embed(g, chars, p).value().size(), 300u);
  EXPECT_EQ(c.embed_dim(), 302u);
}

TEST(CharCnn, ZeroParametersGiveZeroVector) {
  EncoderConfig c;
  c.vocab_size = 4;
  c.alphabet_size = 10;
  c.word_dim = 2;
  c.hidden = 1;
  std::mt19937_64 rng(1);
  auto p = EncoderParams::init(c, rng);
  p.char_table = Tensor(p.char_table.shape());
  for (auto& f : p.filters) {
    f.weight = Tensor(f.weight.shape());
    f.bias = Tensor(f.bias.shape());
  }
  ad::Graph g;
  const std::size_t chars[] = {7};
  EXPECT_EQ(char_cnn_embed(g, chars, p).value(), Tensor({300}, 0.0));
}

TEST(CharCnn, ShortWordIsPaddedForWideFilters) {
  EncoderConfig c = small_config();
  c.char_widths = {5};
  std::mt19937_64 rng(3);
  auto p = EncoderParams::init(c, rng);
  ad::Graph g;
  const std::size_t chars[] = {1, 2};
  const auto v = char_cnn_embed(g, chars, p).value();
  ASSERT_EQ(v.size(), 2u);
  for (double x : v.data()) EXPECT_TRUE(std::isfinite(x));
}

TEST(CharCnn, EmptyWordIsRejected) {
  std::mt19937_64 rng(3);
  auto p = EncoderParams::init(small_config(), rng);
  ad::Graph g;
  EXPECT_THROW(char_cnn_embed(g, std::span<const std::size_t>{}, p), InputError);
  const std::size_t bad[] = {99};
  EXPECT_THROW(char_cnn_embed(g, bad, p), InputError);
}

TEST(EmbedToken, ConcatenatesWordAndCharacterVectors) {
  EncoderConfig c = small_config();
  c.word_dim = 2;
  std::mt19937_64 rng(1);
  auto p = EncoderParams::init(c, rng);
  p.word_table.at(4, 0) = 1.0;
  p.word_table.at(4, 1) = 2.0;
  ad::Graph g;
  auto chars = g.constant(Tensor::vector({3}));
  EXPECT_EQ(embed_token(g, 4, chars, p).value(), Tensor::vector({1, 2, 3}));

  p.word_table.at(5, 0) = 0.0;
  p.word_table.at(5, 1) = 0.0;
  auto zero_chars = g.constant(Tensor::vector({0, 0}));
  EXPECT_EQ(embed_token(g, 5, zero_chars, p).value(), Tensor({4}, 0.0));
  EXPECT_THROW(embed_token(g, 7, chars, p), InputError);
}

TEST(EmbedToken, DefaultEmbeddingWidthIsSixHundred) {
  EncoderConfig c;
  EXPECT_EQ(c.embed_dim(), 600u);
}

TEST(LstmStep, ZeroWeightsAndInputsGiveZeroState) {
  const Tensor x({3}), h({2}), c({2}), w({8, 5}), b({8});
  ad::Graph g;
  auto [h1, c1] = lstm_step(g.constant_ref(x), g.constant_ref(h), g.constant_ref(c), g.constant_ref(w),
                            g.constant_ref(b));
  EXPECT_EQ(h1.value(), Tensor({2}, 0.0));
  EXPECT_EQ(c1.value(), Tensor({2}, 0.0));
}

TEST(LstmStep, SaturatedForgetGateKeepsCell) {
  // d = 1: gate rows i, f, g, o.
  const Tensor x({1}), h({1}), c = Tensor::vector({1.0}), w({4, 2});
  const Tensor b = Tensor::vector({-50.0, 50.0, 0.0, 0.0});
  ad::Graph g;
  auto [h1, c1] = lstm_step(g.constant_ref(x), g.constant_ref(h), g.constant_ref(c), g.constant_ref(w),
                            g.constant_ref(b));
  EXPECT_EQ(c1.value(), Tensor::vector({1.0}));
  EXPECT_NEAR(h1.value()[0], 0.5 * std::tanh(1.0), 1e-15);
}

TEST(LstmStep, ShapeMismatchIsDimensionError) {
  const Tensor x({3}), h({2}), c({2}), w({8, 4}), b({8});
  ad::Graph g;
  EXPECT_THROW(lstm_step(g.constant_ref(x), g.constant_ref(h), g.constant_ref(c), g.constant_ref(w),
                         g.constant_ref(b)),
               DimensionError);
}

TEST(LstmStep, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  auto rnd = [&](Tensor::Shape s) {
    Tensor t(std::move(s));
    for (auto& v : t.data()) v = u(rng);
    return t;
  };
  ParamMap p{{"x", rnd({3})}, {"h", rnd({2})}, {"c", rnd({2})}, {"W", rnd({8, 5})}, {"b", rnd({8})}};
  auto build = [](ad::Graph& g, const ParamMap& m) {
    auto [h, c] = lstm_step(g.parameter("x", m.at("x")), g.parameter("h", m.at("h")),
                            g.parameter("c", m.at("c")), g.parameter("W", m.at("W")),
                            g.parameter("b", m.at("b")));
    return ad::sum(h);
  };
  EXPECT_LT(check_gradients(build, p).max_relative_error(), 1e-5);
}

TEST(EncodeSequence, FullSizedStackHasTwoDColumns) {
  EncoderConfig c;
  c.vocab_size = 10;
  c.alphabet_size = 8;
  c.layers = 3;
  std::mt19937_64 rng(2);
  auto p = EncoderParams::init(c, rng);
  EXPECT_EQ(p.layers[1][0].weight.cols(), 600u + 600u + 300u);
  ad::Graph g;
  auto h = encode_sequence(g, make_sequence({2, 3, 4, 5}, 8), p);
  EXPECT_EQ(h.states.shape(), (Tensor::Shape{4, 600}));
  EXPECT_EQ(h.mask, Tensor({4}, 1.0));
}

TEST(EncodeSequence, SingleLayerHasNoShortcutInput) {
  EncoderConfig c = small_config();
  c.layers = 1;
  std::mt19937_64 rng(2);
  auto p = EncoderParams::init(c, rng);
  ASSERT_EQ(p.layers.size(), 1u);
  EXPECT_EQ(p.layers[0][0].weight.cols(), c.embed_dim() + c.hidden);
  ad::Graph g;
  EXPECT_EQ(encode_sequence(g, make_sequence({1, 2, 3}, 6), p).states.shape(),
            (Tensor::Shape{3, 2 * c.hidden}));
}

TEST(EncodeSequence, TiedDirectionsOnPalindromeMirrorEachOther) {
  for (std::size_t layers : {1, 2}) {
    EncoderConfig c = small_config();
    c.layers = layers;
    std::mt19937_64 rng(4);
    auto p = EncoderParams::init(c, rng);
    // Backward weights mirror forward ones, with the two halves of the
    // shortcut input swapped above the bottom layer.
    const std::size_t de = c.embed_dim(), d = c.hidden;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto& fwd = p.layers[l][0];
      auto& bwd = p.layers[l][1];
      bwd = fwd;
      if (l == 0) continue;
      for (std::size_t r = 0; r < fwd.weight.rows(); ++r)
        for (std::size_t k = 0; k < d; ++k) {
          bwd.weight.at(r, de + k) = fwd.weight.at(r, de + d + k);
          bwd.weight.at(r, de + d + k) = fwd.weight.at(r, de + k);
        }
    }
    ad::Graph g;
    const auto h = encode_sequence(g, make_sequence({2, 5, 3, 5, 2}, 6), p).states.value();
    const std::size_t steps = 5;
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t k = 0; k < d; ++k) {
        // Above the bottom layer the permuted columns change summation order.
        if (layers == 1) EXPECT_EQ(h.at(t, k), h.at(steps - 1 - t, d + k));
        else EXPECT_NEAR(h.at(t, k), h.at(steps - 1 - t, d + k), 1e-14);
      }
  }
}

TEST(EncodeSequence, OutputShapeAndDeterminismAcrossDepths) {
  for (std::size_t layers = 1; layers <= 3; ++layers) {
    EncoderConfig c = small_config();
    c.layers = layers;
    std::mt19937_64 rng(5);
    auto p = EncoderParams::init(c, rng);
    const auto seq = make_sequence({1, 4, 6}, 6);
    ad::Graph g1, g2;
    const auto a = encode_sequence(g1, seq, p).states.value();
    const auto b = encode_sequence(g2, seq, p).states.value();
    EXPECT_EQ(a.shape(), (Tensor::Shape{3, 6}));
    EXPECT_EQ(a, b);
  }
}

TEST(EncodeSequence, EmptySequenceIsRejected) {
  std::mt19937_64 rng(5);
  auto p = EncoderParams::init(small_config(), rng);
  ad::Graph g;
  EXPECT_THROW(encode_sequence(g, TokenSequence{}, p), InputError);
}

TEST(EncodeSequence, FullStackGradientMatchesFiniteDifferences) {
  for (std::size_t layers : {1, 2}) {
    EncoderConfig c = small_config();
    c.layers = layers;
    std::mt19937_64 rng(10 + layers);
    auto p = EncoderParams::init(c, rng);
    const auto seq = make_sequence({1, 5, 2, 6}, 6);
    EncoderParams scratch = p;
    auto build = struct_builder(scratch, [&](ad::Graph& g, const EncoderParams& q) {
      return ad::sum(encode_sequence(g, seq, q).states);
    });
    const auto report = check_gradients(build, trainable_map(p));
    for (const auto& e : report.entries) EXPECT_LT(e.relative_error, 1e-4) << e.parameter;
  }
}
