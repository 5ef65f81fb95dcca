#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gpool/checkpoint.hpp"
#include "gpool/config.hpp"
#include "gpool/data.hpp"
#include "gpool/training.hpp"

namespace gpool {

/// Tokenized splits plus the vocabulary built from the training split.
struct PreparedData {
  Vocabulary vocab;
  std::vector<std::string> labels;
  std::vector<TextExample> train_text, dev_text, test_text;
  std::vector<Example> train, dev, test;
};

/// Loads or generates the splits named by `config.data` and fills in the
/// data-derived model sizes (vocabulary, alphabet, classes, pair flag).
PreparedData prepare_data(RunConfig& config);

/// Encodes an evaluation split with an existing vocabulary.
std::vector<Example> load_split(const RunConfig& config, const Vocabulary& vocab, const std::string& split);

/// Fresh model for a prepared config, with pretrained vectors when configured.
Model build_model(const RunConfig& config, const PreparedData& data);

struct TrainArtifacts {
  TrainResult result;
  std::string checkpoint_path;
  std::string metrics_path;
  std::string config_path;
};

/// Trains and writes config.json, metrics.csv and model.ckpt under config.out.
TrainArtifacts command_train(RunConfig config, std::ostream& log);

/// Scores a checkpoint on a split and writes eval.json under config.out.
EvalResult command_eval(const RunConfig& config, const std::string& checkpoint_path,
                        const std::string& split, std::ostream& log);

struct GradCheckRow {
  std::string module;
  std::size_t tensors = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Finite-difference checks of every module on small random instances
/// (T <= 4, d <= 3, d_a <= 4, I <= 3).
std::vector<GradCheckRow> gradcheck_suite(std::uint64_t seed, double tolerance = 1e-4);

struct SweepRow {
  std::size_t heads = 0;
  std::size_t best_epoch = 0;
  double best_dev_acc = 0.0;
  std::string metrics_path;
};

inline const std::vector<std::size_t> kSweepHeads = {1, 3, 5, 7, 9};

/// Trains one run per head count into config.out/heads_<I>.
std::vector<SweepRow> command_sweep_heads(const RunConfig& config, bool parallel, std::ostream& log);

/// Per-head attention matrices of one sentence, each [T x 2d].
struct AttentionExport {
  std::vector<std::string> tokens;
  std::vector<Tensor> heads;
};

AttentionExport export_attention(const Checkpoint& ckpt, const std::vector<std::string>& tokens);

/// {"tokens": [...], "heads": [[[row values]...]...], "shape": [T, 2d]}
json attention_to_json(const AttentionExport& maps);
AttentionExport attention_from_json(const json& doc);

/// Mean of ||A^i - A^j||_F over head pairs i < j; 0 for a single head.
double mean_pairwise_frobenius(const std::vector<Tensor>& heads);

struct ExportSummary {
  std::size_t sentences = 0;
  double diversity = 0.0;                  // mean over sentences
  std::optional<double> compare_diversity;  // second checkpoint, if any
};

/// Writes attention/<tag>/sentence_<k>.json for each sentence and
/// attention/summary.json under config.out. Without explicit sentences the
/// first `limit` sentences of the dev split are used.
ExportSummary command_export_attention(const RunConfig& config, const std::string& checkpoint_path,
                                       const std::optional<std::string>& compare_path,
                                       const std::vector<std::string>& sentences, std::size_t limit,
                                       std::ostream& log);

/// Command-line front end; returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gpool
