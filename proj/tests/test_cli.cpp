#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gpool/commands.hpp"

using namespace gpool;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gpool_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(path("small.json")) << R"({
      "model": {"encoder": {"word_dim": 6, "hidden": 4}, "attention_dim": 5, "mlp_hidden": 6, "heads": 3},
      "train": {"epochs": 2},
      "data": {"synthetic": {"n": 100, "min_length": 5, "max_length": 7, "vocab_size": 12}}
    })";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  static json read(const std::string& p) {
    std::ifstream in(p);
    return json::parse(in);
  }

  static std::size_t lines(const std::string& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string s; std::getline(in, s);) ++n;
    return n;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, GradcheckPassesOnFreshModel) {
  EXPECT_EQ(run({"gradcheck"}), 0) << out_.str();
  EXPECT_EQ(out_.str().find("FAIL"), std::string::npos);
  for (const auto& r : gradcheck_suite(3)) EXPECT_LT(r.max_relative_error, 1e-4) << r.module;
}

TEST_F(CliTest, TrainWritesResolvedConfigMetricsAndCheckpoint) {
  const auto out = path("run");
  ASSERT_EQ(run({"train", "--config", path("small.json"), "--heads", "2", "--seed", "4", "--out", out}), 0)
      << err_.str();
  const auto config = read(out + "/config.json");
  EXPECT_EQ(config["model"]["heads"], 2);
  EXPECT_EQ(config["model"]["encoder"]["hidden"], 4);
  EXPECT_EQ(config["train"]["seed"], 4);
  EXPECT_EQ(config["out"], out);
  EXPECT_NO_THROW(run_config_from_json(config));
  EXPECT_EQ(lines(out + "/metrics.csv"), 3u);
  const auto ckpt = load_checkpoint(out + "/model.ckpt");
  EXPECT_EQ(ckpt.model.config().heads, 2u);
  for (const auto& entry : fs::directory_iterator(out))
    EXPECT_EQ(entry.path().string().find(".tmp."), std::string::npos) << entry.path();

  ASSERT_EQ(run({"eval", "--checkpoint", out + "/model.ckpt"}), 0) << err_.str();
  const auto eval = read(out + "/eval.json");
  EXPECT_EQ(eval["accuracy"].get<double>(), ckpt.info["dev_acc"].get<double>());
  EXPECT_EQ(eval["total"], 10);
}

TEST_F(CliTest, InvalidConfigNamesOffendingKey) {
  std::ofstream(path("bad.json")) << R"({"penalty": {"kind": "none", "gamma": 2}})";
  EXPECT_EQ(run({"train", "--config", path("bad.json")}), 2);
  EXPECT_NE(err_.str().find("'penalty.gamma'"), std::string::npos) << err_.str();
  std::ofstream(path("typed.json")) << R"({"train": {"epochs": "ten"}})";
  EXPECT_EQ(run({"train", "--config", path("typed.json")}), 2);
  EXPECT_NE(err_.str().find("'train.epochs'"), std::string::npos) << err_.str();
  std::ofstream(path("broken.json")) << "{";
  EXPECT_EQ(run({"train", "--config", path("broken.json")}), 2);
  EXPECT_NE(run({"train", "--penalty", "frobenius"}), 0);
  EXPECT_NE(run({"frobnicate"}), 0);
}

TEST_F(CliTest, MissingCheckpointFails) {
  EXPECT_NE(run({"eval", "--checkpoint", path("none.ckpt")}), 0);
  EXPECT_NE(run({"export-attention", "--checkpoint", path("none.ckpt")}), 0);
  EXPECT_NE(run({"eval"}), 0);
}

TEST_F(CliTest, ExportAttentionShapes) {
  const auto out = path("run");
  ASSERT_EQ(run({"train", "--config", path("small.json"), "--heads", "5", "--epochs", "1", "--out", out}), 0);
  ASSERT_EQ(run({"export-attention", "--checkpoint", out + "/model.ckpt", "--sentence", "m0 w1 w2 m3 w4",
                 "--out", path("exp")}),
            0)
      << err_.str();
  const auto doc = read(path("exp/attention/checkpoint/sentence_000.json"));
  EXPECT_EQ(doc["tokens"].size(), 5u);
  EXPECT_EQ(doc["shape"], json({5, 8}));
  ASSERT_EQ(doc["heads"].size(), 5u);
  for (const auto& head : doc["heads"]) {
    ASSERT_EQ(head.size(), 5u);
    for (const auto& r : head) EXPECT_EQ(r.size(), 8u);
    for (std::size_t k = 0; k < 8; ++k) {
      double s = 0;
      for (const auto& r : head) s += r[k].get<double>();
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  const auto maps = attention_from_json(doc);
  const auto summary = read(path("exp/attention/summary.json"));
  EXPECT_EQ(summary["checkpoint"]["mean_pairwise_frobenius"].get<double>(), mean_pairwise_frobenius(maps.heads));
}

TEST_F(CliTest, ExportPairsTwoCheckpoints) {
  ASSERT_EQ(run({"train", "--config", path("small.json"), "--epochs", "1", "--out", path("a")}), 0);
  ASSERT_EQ(run({"train", "--config", path("small.json"), "--epochs", "1", "--penalty", "attention", "--out",
                 path("b")}),
            0);
  ASSERT_EQ(run({"export-attention", "--checkpoint", path("b/model.ckpt"), "--compare-checkpoint",
                 path("a/model.ckpt"), "--limit", "4", "--out", path("exp")}),
            0)
      << err_.str();
  for (int k = 0; k < 4; ++k) {
    const auto name = "sentence_00" + std::to_string(k) + ".json";
    const auto a = read(path("exp/attention/checkpoint/" + name));
    const auto b = read(path("exp/attention/compare/" + name));
    EXPECT_EQ(a["tokens"], b["tokens"]);
  }
  EXPECT_TRUE(read(path("exp/attention/summary.json")).contains("compare"));
  EXPECT_FALSE(fs::exists(path("exp/attention/checkpoint/sentence_004.json")));
}

TEST_F(CliTest, ExportRejectsBaselinePooling) {
  ASSERT_EQ(run({"train", "--config", path("small.json"), "--epochs", "1", "--pooling", "mean", "--out",
                 path("m")}),
            0);
  EXPECT_EQ(run({"export-attention", "--checkpoint", path("m/model.ckpt"), "--out", path("exp")}), 1);
}

TEST_F(CliTest, SweepHeadsEmitsFiveEqualCsvs) {
  for (const char* mode : {"sequential", "parallel"}) {
    const auto out = path(mode);
    std::vector<std::string> args{"sweep-heads", "--config", path("small.json"), "--out", out};
    if (std::string(mode) == "parallel") args.push_back("--parallel");
    ASSERT_EQ(run(args), 0) << err_.str();
    for (auto heads : kSweepHeads) {
      const auto csv = out + "/heads_" + std::to_string(heads) + "/metrics.csv";
      EXPECT_EQ(lines(csv), 3u) << csv;
      EXPECT_EQ(read(out + "/heads_" + std::to_string(heads) + "/config.json")["model"]["heads"], heads);
    }
    EXPECT_EQ(lines(out + "/sweep.csv"), 6u);
  }
  std::ifstream a(path("sequential/heads_5/metrics.csv")), b(path("parallel/heads_5/metrics.csv"));
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Diversity, MeanPairwiseFrobenius) {
  const Tensor a = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor b = Tensor::matrix({{0, 1}, {1, 0}});
  EXPECT_EQ(mean_pairwise_frobenius({a}), 0.0);
  EXPECT_DOUBLE_EQ(mean_pairwise_frobenius({a, b}), 2.0);
  EXPECT_DOUBLE_EQ(mean_pairwise_frobenius({a, a, b}), 4.0 / 3.0);
}
