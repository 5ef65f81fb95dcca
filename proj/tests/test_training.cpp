#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gpool/config.hpp"
#include "gpool/data.hpp"
#include "gpool/error.hpp"
#include "gpool/training.hpp"

using namespace gpool;

namespace {

struct Task {
  ModelConfig model;
  TrainConfig train;
  std::vector<Example> train_set, dev_set;
};

Task small_task(std::size_t n = 120, std::size_t epochs = 2) {
  SyntheticConfig sc;
  sc.n = n;
  sc.vocab_size = 12;
  sc.min_length = 3;
  sc.max_length = 6;
  const auto splits = gen_synthetic(sc);
  const auto vocab = build_vocab(corpus_of(splits.train));
  Task t;
  t.model = preset("synthetic").model;
  t.model.encoder.word_dim = 6;
  t.model.encoder.hidden = 4;
  t.model.attention_dim = 5;
  t.model.mlp_hidden = 8;
  t.model.heads = 3;
  t.model.encoder.vocab_size = vocab.size();
  t.model.encoder.alphabet_size = vocab.alphabet_size();
  t.model.num_classes = 4;
  t.train.epochs = epochs;
  t.train.batch_size = 16;
  t.train.seed = 3;
  t.train_set = encode_examples(splits.train, vocab);
  t.dev_set = encode_examples(splits.dev, vocab);
  return t;
}

Model init_model(const ModelConfig& cfg, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  return Model::init(cfg, rng);
}

}  // namespace

TEST(AdamStep, FirstStepMovesByLearningRate) {
  Tensor p({3}, 2.0);
  const ParamRefs refs{{"p", &p}};
  OptimizerState state;
  state.config.lr = 0.001;
  adam_step(refs, {{"p", Tensor({3}, 1.0)}}, state);
  for (double v : p.data()) EXPECT_NEAR(v, 2.0 - 0.001, 1e-9);
  EXPECT_EQ(state.step, 1u);
  EXPECT_EQ(state.m.at("p").shape(), p.shape());
  EXPECT_EQ(state.v.at("p").shape(), p.shape());
}

TEST(AdamStep, ZeroGradientLeavesParametersUnchanged) {
  Tensor p = Tensor::vector({1.5, -2.0});
  const Tensor before = p;
  OptimizerState state;
  adam_step({{"p", &p}}, {{"p", Tensor({2})}}, state);
  EXPECT_EQ(p, before);
}

TEST(AdamStep, OppositeGradientsGiveMirroredUpdates) {
  Tensor a({2}, 0.0), b({2}, 0.0);
  OptimizerState state;
  const Tensor g = Tensor::vector({0.3, -7.0});
  Tensor neg = g;
  neg *= -1.0;
  for (int i = 0; i < 5; ++i) adam_step({{"a", &a}, {"b", &b}}, {{"a", g}, {"b", neg}}, state);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(a[k], -b[k]);
  EXPECT_EQ(state.step, 5u);
}

TEST(AdamStep, RejectsUnknownOrMisshapenGradients) {
  Tensor p({2});
  OptimizerState state;
  EXPECT_THROW(adam_step({{"p", &p}}, {{"q", Tensor({2})}}, state), InputError);
  EXPECT_THROW(adam_step({{"p", &p}}, {{"p", Tensor({3})}}, state), DimensionError);
}

TEST(TrainModel, SameSeedReplaysBitExactly) {
  auto t = small_task();
  const auto a = train_model(init_model(t.model), t.train, t.train_set, t.dev_set);
  const auto b = train_model(init_model(t.model), t.train, t.train_set, t.dev_set);
  ASSERT_EQ(a.epochs.size(), 2u);
  EXPECT_EQ(a.epochs[0].train_loss, b.epochs[0].train_loss);
  EXPECT_EQ(a.epochs[1].train_loss, b.epochs[1].train_loss);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].loss, b.steps[i].loss);
}

TEST(TrainModel, ZeroWeightPenaltyMatchesNoPenalty) {
  auto t = small_task();
  const auto none = train_model(init_model(t.model), t.train, t.train_set, t.dev_set);
  for (auto kind : {PenaltyKind::Parameters, PenaltyKind::Attention, PenaltyKind::Embeddings}) {
    auto cfg = t.train;
    cfg.penalty.kind = kind;
    cfg.penalty.mu = 0.0;
    const auto zero = train_model(init_model(t.model), cfg, t.train_set, t.dev_set);
    ASSERT_EQ(zero.steps.size(), none.steps.size());
    for (std::size_t i = 0; i < none.steps.size(); ++i) EXPECT_EQ(zero.steps[i].loss, none.steps[i].loss);
    EXPECT_EQ(zero.epochs.back().train_penalty, 0.0);
  }
}

TEST(TrainModel, IdenticalHeadsStartAtParameterPenaltyBound) {
  auto t = small_task(60, 1);
  t.model.identical_heads = true;
  t.train.penalty = {PenaltyKind::Parameters, 1.0, 0.01};
  const auto r = train_model(init_model(t.model), t.train, t.train_set, t.dev_set);
  const double heads = static_cast<double>(t.model.heads);
  EXPECT_EQ(r.initial_penalty, 0.01 * 1.0 * heads * (heads - 1) / 2);
}

TEST(TrainModel, StepLogRecordsClippingAgainstThreshold) {
  auto t = small_task(60, 2);
  t.train.clip = 0.5;
  const auto r = train_model(init_model(t.model), t.train, t.train_set, t.dev_set);
  ASSERT_FALSE(r.steps.empty());
  for (const auto& s : r.steps) {
    EXPECT_TRUE(std::isfinite(s.grad_norm));
    EXPECT_EQ(s.clipped, s.grad_norm > 0.5);
  }
  t.train.clip = 1e6;
  const auto loose = train_model(init_model(t.model), t.train, t.train_set, t.dev_set);
  for (const auto& s : loose.steps) EXPECT_FALSE(s.clipped);
}

TEST(TrainModel, LossDecreasesOverFirstEpochs) {
  auto t = small_task(200, 5);
  t.train.batch_size = 8;
  const auto r = train_model(init_model(t.model), t.train, t.train_set, t.dev_set);
  for (std::size_t e = 1; e < r.epochs.size(); ++e)
    EXPECT_LT(r.epochs[e].train_loss, r.epochs[e - 1].train_loss) << "epoch " << e + 1;
}

TEST(TrainModel, BestEpochHasHighestDevAccuracy) {
  auto t = small_task(120, 4);
  std::vector<double> seen;
  const auto r = train_model(init_model(t.model), t.train, t.train_set, t.dev_set,
                             [&](const EpochMetrics& m, const Model&) { seen.push_back(m.dev_acc); });
  ASSERT_EQ(seen.size(), 4u);
  const double best = *std::max_element(seen.begin(), seen.end());
  EXPECT_EQ(r.best_dev_acc, best);
  EXPECT_EQ(seen[r.best_epoch - 1], best);
  for (std::size_t e = 0; e + 1 < r.best_epoch; ++e) EXPECT_LT(seen[e], best);
  EXPECT_EQ(evaluate(r.best, t.dev_set).accuracy, best);
}

TEST(TrainModel, NonFiniteLossNamesBatchAndStep) {
  auto t = small_task(60, 1);
  auto model = init_model(t.model);
  model.visit([](const std::string& name, Tensor& w, bool) {
    if (name == "mlp.output.bias") w[0] = std::numeric_limits<double>::quiet_NaN();
  });
  try {
    train_model(model, t.train, t.train_set, t.dev_set);
    FAIL();
  } catch (const NumericError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("batch 0"), std::string::npos) << what;
    EXPECT_NE(what.find("step 1"), std::string::npos) << what;
  }
}

TEST(TrainModel, RejectsEmptyDataAndBadConfig) {
  auto t = small_task(60, 1);
  const auto model = init_model(t.model);
  EXPECT_THROW(train_model(model, t.train, {}, t.dev_set), InputError);
  EXPECT_THROW(train_model(model, t.train, t.train_set, {}), InputError);
  t.train.lr = 0;
  EXPECT_THROW(train_model(model, t.train, t.train_set, t.dev_set), ConfigError);
}

TEST(Evaluate, CountsAndEdgeCases) {
  auto t = small_task(60, 1);
  const auto model = init_model(t.model);
  Example ex = t.dev_set.front();
  ex.label = model.predict(ex);
  const std::vector<Example> one{ex};
  const auto r = evaluate(model, one);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.class_correct[ex.label], 1u);
  EXPECT_THROW(evaluate(model, {}), InputError);
  ex.label = 9;
  const std::vector<Example> bad{ex};
  EXPECT_THROW(evaluate(model, bad), InputError);
}

TEST(Evaluate, UniformModelScoresChanceOnBalancedClasses) {
  auto t = small_task(60, 1);
  t.model.num_classes = 5;
  auto model = init_model(t.model);
  model.visit([](const std::string& name, Tensor& w, bool) {
    if (name.rfind("mlp.output", 0) == 0) w = Tensor(w.shape());
  });
  std::vector<Example> data;
  for (std::size_t i = 0; i < 50; ++i) {
    Example ex = t.train_set[i % t.train_set.size()];
    ex.label = i % 5;
    data.push_back(ex);
  }
  const auto r = evaluate(model, data);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.2);
  EXPECT_EQ(r.class_correct[0], 10u);
}

TEST(MetricsCsv, HeaderAndRowFormat) {
  EXPECT_EQ(metrics_csv_header(), "epoch,train_loss,train_ce,train_penalty,dev_acc");
  EXPECT_EQ(metrics_csv_row({3, 1.5, 1.25, 0.25, 0.5}), "3,1.5,1.25,0.25,0.5");
}
