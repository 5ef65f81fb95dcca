#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gpool/autodiff.hpp"
#include "gpool/model.hpp"
#include "gpool/penalties.hpp"

namespace gpool {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  GradientBundle m;  // first moments, created on first use
  GradientBundle v;  // second moments
};

using ParamRefs = std::map<std::string, Tensor*>;

/// Trainable tensors of a model, keyed by parameter name.
ParamRefs trainable_refs(Model& model);

/// One bias-corrected Adam update of every parameter that has a gradient.
void adam_step(const ParamRefs& params, const GradientBundle& grads, OptimizerState& state);

struct TrainConfig {
  double lr = 1e-3;
  double clip = 0.5;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  PenaltyConfig penalty;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_ce = 0.0;
  double train_penalty = 0.0;
  double dev_acc = 0.0;
};

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  bool clipped = false;
};

struct TrainResult {
  Model best;
  std::size_t best_epoch = 0;
  double best_dev_acc = 0.0;
  /// Penalty of the first batch, computed before any update.
  double initial_penalty = 0.0;
  std::vector<EpochMetrics> epochs;
  std::vector<StepRecord> steps;
};

using EpochCallback = std::function<void(const EpochMetrics&, const Model&)>;

/// Minimizes mean cross-entropy plus the configured penalty with Adam and
/// global-norm clipping. Keeps the parameters of the epoch with the highest
/// dev accuracy (earliest on ties).
TrainResult train_model(Model model, const TrainConfig& config, std::span<const Example> train,
                        std::span<const Example> dev, const EpochCallback& on_epoch = {});

struct EvalResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::size_t> class_total;
  std::vector<std::size_t> class_correct;
};

/// Argmax accuracy, ties to the lowest class index.
EvalResult evaluate(const Model& model, std::span<const Example> data);

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

}  // namespace gpool
