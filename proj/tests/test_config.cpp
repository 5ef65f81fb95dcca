#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gpool/checkpoint.hpp"
#include "gpool/config.hpp"
#include "gpool/error.hpp"

using namespace gpool;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("gpool_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Checkpoint small_checkpoint() {
  Checkpoint c;
  c.vocab = build_vocab({{"the", "cat", "sat", "\xc3\xa9t\xc3\xa9"}});
  c.labels = {"x", "y", "z"};
  c.lowercase = true;
  ModelConfig m;
  m.encoder.vocab_size = c.vocab.size();
  m.encoder.alphabet_size = c.vocab.alphabet_size();
  m.encoder.word_dim = 3;
  m.encoder.char_dim = 2;
  m.encoder.char_widths = {1, 3};
  m.encoder.char_maps = 2;
  m.encoder.hidden = 2;
  m.encoder.layers = 2;
  m.heads = 2;
  m.attention_dim = 3;
  m.mlp_hidden = 4;
  m.num_classes = 3;
  m.pair_task = true;
  std::mt19937_64 rng(4);
  c.model = Model::init(m, rng);
  c.info = {{"epoch", 7}};
  return c;
}

}  // namespace

TEST(Presets, MatchPublishedHyperparameters) {
  const auto snli = preset("snli");
  EXPECT_EQ(snli.train.lr, 4e-4);
  EXPECT_EQ(snli.train.clip, 10.0);
  EXPECT_EQ(snli.train.batch_size, 128u);
  EXPECT_EQ(snli.model.encoder.layers, 3u);
  EXPECT_EQ(snli.model.encoder.hidden, 600u);
  EXPECT_EQ(snli.model.attention_dim, 600u);
  EXPECT_EQ(snli.model.mlp_hidden, 600u);
  EXPECT_FALSE(snli.model.encoder.train_embeddings);

  const auto mnli = preset("multinli");
  EXPECT_EQ(mnli.train.batch_size, 32u);
  EXPECT_EQ(mnli.model.encoder.hidden, 300u);
  EXPECT_FALSE(mnli.model.encoder.train_embeddings);

  const auto age = preset("age");
  EXPECT_EQ(age.train.lr, 2e-3);
  EXPECT_EQ(age.train.clip, 0.5);
  EXPECT_EQ(age.model.encoder.layers, 1u);
  EXPECT_TRUE(age.model.encoder.train_embeddings);

  const auto yelp = preset("yelp");
  EXPECT_EQ(yelp.train.lr, 1e-3);
  EXPECT_EQ(yelp.model.mlp_hidden, 300u);

  for (const auto& name : preset_names()) {
    const auto c = preset(name);
    EXPECT_EQ(c.model.heads, 5u) << name;
    EXPECT_EQ(c.train.penalty.lambda, 1.0) << name;
  }
  EXPECT_THROW(preset("imdb"), ConfigError);
}

TEST(RunConfig, JsonRoundTrip) {
  for (const auto& name : preset_names()) {
    const auto j = to_json(preset(name));
    EXPECT_EQ(to_json(run_config_from_json(j)), j) << name;
  }
}

TEST(RunConfig, SchemaRejectsUnknownKeysByPath) {
  auto j = to_json(preset("synthetic"));
  j["train"]["momentum"] = 0.9;
  try {
    run_config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'train.momentum'"), std::string::npos) << e.what();
  }
  j = to_json(preset("synthetic"));
  j["model"]["encoder"]["heads"] = 3;
  EXPECT_THROW(run_config_from_json(j), ConfigError);
}

TEST(RunConfig, SchemaRejectsWrongTypesAndValues) {
  auto j = to_json(preset("synthetic"));
  j["model"]["heads"] = "five";
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(preset("synthetic"));
  j["model"]["heads"] = -1;
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(preset("synthetic"));
  j["penalty"]["kind"] = "frobenius";
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(preset("synthetic"));
  j["data"]["labels"] = {"a", 3.5};
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(preset("synthetic"));
  j["train"]["lr"] = 1;
  EXPECT_EQ(run_config_from_json(j).train.lr, 1.0);
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  const auto c = small_checkpoint();
  const auto back = deserialize_checkpoint(serialize_checkpoint(c));
  EXPECT_EQ(back.labels, c.labels);
  EXPECT_TRUE(back.lowercase);
  EXPECT_EQ(back.info, c.info);
  EXPECT_EQ(back.vocab.regular_tokens(), c.vocab.regular_tokens());
  EXPECT_EQ(back.vocab.alphabet(), c.vocab.alphabet());
  EXPECT_EQ(model_config_to_json(back.model.config()), model_config_to_json(c.model.config()));
  std::vector<Tensor> a, b;
  c.model.visit([&](const std::string&, const Tensor& t, bool) { a.push_back(t); });
  back.model.visit([&](const std::string&, const Tensor& t, bool) { b.push_back(t); });
  EXPECT_EQ(a, b);

  Example ex;
  ex.sentence_a = c.vocab.encode({"the", "cat"});
  ex.sentence_b = c.vocab.encode({"\xc3\xa9t\xc3\xa9", "sat", "dog"});
  ad::Graph g1, g2;
  EXPECT_EQ(c.model.forward(g1, ex).logits.value(), back.model.forward(g2, ex).logits.value());
}

TEST(Checkpoint, EveryTruncationFailsToLoad) {
  const auto bytes = serialize_checkpoint(small_checkpoint());
  for (std::size_t cut = 0; cut < bytes.size(); cut += 1 + cut / 7) {
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut)), Error) << "cut " << cut;
  }
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), FormatError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "junk"), FormatError);
}

TEST(Checkpoint, SaveIsAtomicAndLoadable) {
  const auto dir = temp_dir("ckpt");
  const auto path = (dir / "sub" / "model.ckpt").string();
  const auto c = small_checkpoint();
  save_checkpoint(path, c);
  save_checkpoint(path, c);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "sub")) {
    (void)entry;
    ++files;
  }
  EXPECT_EQ(files, 1u);
  EXPECT_EQ(load_checkpoint(path).labels, c.labels);
  EXPECT_THROW(load_checkpoint((dir / "missing.ckpt").string()), InputError);
  fs::remove_all(dir);
}
