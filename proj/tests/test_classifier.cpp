#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gpool/classifier.hpp"
#include "gpool/error.hpp"
#include "gpool/gradcheck.hpp"
#include "oracles.hpp"

using namespace gpool;

TEST(PairFeatures, HandComputedLayout) {
  const Tensor a = Tensor::vector({1, 2}), b = Tensor::vector({3, 1});
  ad::Graph g;
  EXPECT_EQ(pair_features(g.constant_ref(a), g.constant_ref(b)).value(),
            Tensor::vector({1, 2, 3, 1, 2, 1, 3, 2}));
}

TEST(PairFeatures, IdenticalAndZeroInputs) {
  const Tensor a = Tensor::vector({-2, 0.5}), z({2});
  ad::Graph g;
  EXPECT_EQ(pair_features(g.constant_ref(a), g.constant_ref(a)).value(),
            Tensor::vector({-2, 0.5, -2, 0.5, 0, 0, 4, 0.25}));
  EXPECT_EQ(pair_features(g.constant_ref(z), g.constant_ref(a)).value(),
            Tensor::vector({0, 0, -2, 0.5, 2, 0.5, 0, 0}));
}

TEST(PairFeatures, SwappingInputsSwapsOnlyFirstTwoBlocks) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 7;
    const Tensor a = oracle::random_uniform({n}, rng), b = oracle::random_uniform({n}, rng);
    ad::Graph g;
    const auto ab = pair_features(g.constant_ref(a), g.constant_ref(b)).value();
    const auto ba = pair_features(g.constant_ref(b), g.constant_ref(a)).value();
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_EQ(ab[k], ba[n + k]);
      EXPECT_EQ(ab[n + k], ba[k]);
      EXPECT_EQ(ab[2 * n + k], ba[2 * n + k]);
      EXPECT_EQ(ab[3 * n + k], ba[3 * n + k]);
    }
  }
}

TEST(PairFeatures, LengthMismatchIsInputError) {
  const Tensor a({2}), b({3});
  ad::Graph g;
  EXPECT_THROW(pair_features(g.constant_ref(a), g.constant_ref(b)), InputError);
}

TEST(MlpForward, ShapesFollowShortcutConcatenation) {
  std::mt19937_64 rng(2);
  const auto p = ClassifierParams::init({6, 4, 3}, rng);
  EXPECT_EQ(p.w_a.shape(), (Tensor::Shape{4, 6}));
  EXPECT_EQ(p.w_b.shape(), (Tensor::Shape{4, 10}));
  EXPECT_EQ(p.w_o.shape(), (Tensor::Shape{3, 14}));
  const Tensor x = oracle::random_uniform({6}, rng);
  ad::Graph g;
  EXPECT_EQ(mlp_forward(g, g.constant_ref(x), p).value().shape(), (Tensor::Shape{3}));
  const Tensor bad({5});
  EXPECT_THROW(mlp_forward(g, g.constant_ref(bad), p), InputError);
}

TEST(MlpForward, ZeroParametersGiveUniformPrediction) {
  std::mt19937_64 rng(3);
  auto p = ClassifierParams::init({4, 5, 3}, rng);
  ClassifierParams::visit(p, [](const std::string&, Tensor& t, bool) { t = Tensor(t.shape()); });
  const Tensor x = oracle::random_uniform({4}, rng);
  ad::Graph g;
  auto logits = mlp_forward(g, g.constant_ref(x), p);
  EXPECT_EQ(logits.value(), Tensor({3}, 0.0));
  EXPECT_NEAR(ad::cross_entropy(logits, 1).value().item(), std::log(3.0), 1e-15);
}

TEST(MlpForward, MatchesHandWrittenLoops) {
  std::mt19937_64 rng(4);
  const std::size_t n = 5, h = 4, k = 3;
  auto p = ClassifierParams::init({n, h, k}, rng);
  p.b_a = oracle::random_uniform({h}, rng);
  p.b_b = oracle::random_uniform({h}, rng);
  p.b_o = oracle::random_uniform({k}, rng);
  const Tensor x = oracle::random_uniform({n}, rng);

  auto affine = [](const Tensor& w, const Tensor& b, const std::vector<double>& in) {
    std::vector<double> out(w.rows());
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = b[r];
      for (std::size_t c = 0; c < w.cols(); ++c) s += w.at(r, c) * in[c];
      out[r] = s;
    }
    return out;
  };
  auto relu = [](std::vector<double> v) {
    for (auto& e : v) e = std::max(e, 0.0);
    return v;
  };
  std::vector<double> in = x.values();
  const auto h1 = relu(affine(p.w_a, p.b_a, in));
  in.insert(in.end(), h1.begin(), h1.end());
  const auto h2 = relu(affine(p.w_b, p.b_b, in));
  in.insert(in.end(), h2.begin(), h2.end());
  const auto want = affine(p.w_o, p.b_o, in);

  ad::Graph g;
  const auto got = mlp_forward(g, g.constant_ref(x), p).value();
  for (std::size_t c = 0; c < k; ++c) EXPECT_NEAR(got[c], want[c], 1e-13);
}

TEST(MlpForward, CrossEntropyGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (std::size_t label = 0; label < 3; ++label) {
    auto p = ClassifierParams::init({4, 3, 3}, rng);
    p.b_a = oracle::random_uniform({3}, rng, 0.1, 0.5);
    p.b_b = oracle::random_uniform({3}, rng, 0.1, 0.5);
    auto params = trainable_map(p);
    params.emplace("x", oracle::random_uniform({4}, rng));
    ClassifierParams scratch = p;
    auto build = [&](ad::Graph& g, const ParamMap& m) {
      ClassifierParams::visit(scratch, [&](const std::string& name, Tensor& t, bool) { t = m.at(name); });
      return ad::cross_entropy(mlp_forward(g, g.parameter("x", m.at("x")), scratch), label);
    };
    EXPECT_LT(check_gradients(build, params).max_relative_error(), 1e-5);
  }
}

TEST(CrossEntropy, ClosedFormValues) {
  ad::Graph g;
  EXPECT_NEAR(ad::cross_entropy(g.constant(Tensor({5}, 0.7)), 2).value().item(), std::log(5.0), 1e-12);
  auto logits = g.constant(Tensor::vector({10, -10}));
  EXPECT_NEAR(ad::cross_entropy(logits, 0).value().item(), std::log1p(std::exp(-20.0)), 1e-20);
  EXPECT_NEAR(ad::cross_entropy(logits, 0).value().item(), 2.06e-9, 1e-11);
  EXPECT_NEAR(ad::cross_entropy(logits, 1).value().item(), 20.0, 1e-8);
  EXPECT_THROW(ad::cross_entropy(logits, 2), InputError);
}

TEST(CrossEntropy, NonNegativeAndShiftInvariant) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 6;
    const Tensor logits = oracle::random_uniform({k}, rng, -20.0, 20.0);
    Tensor shifted = logits;
    const double c = std::uniform_real_distribution<double>(-100.0, 100.0)(rng);
    for (auto& v : shifted.data()) v += c;
    const std::size_t label = trial % k;
    ad::Graph g;
    const double a = ad::cross_entropy(g.constant_ref(logits), label).value().item();
    const double b = ad::cross_entropy(g.constant_ref(shifted), label).value().item();
    EXPECT_GE(a, 0.0);
    EXPECT_NEAR(a, b, 1e-9);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  for (std::size_t k = 2; k <= 8; ++k) {
    ad::Graph g;
    EXPECT_NEAR(ad::cross_entropy(g.constant(Tensor({k}, -3.0)), k - 1).value().item(),
                std::log(static_cast<double>(k)), 1e-13);
  }
}
