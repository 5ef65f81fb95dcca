#include "gpool/training.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>

#include "gpool/data.hpp"
#include "gpool/error.hpp"

namespace gpool {

ParamRefs trainable_refs(Model& model) {
  ParamRefs out;
  model.visit([&](const std::string& name, Tensor& t, bool trainable) {
    if (trainable) out.emplace(name, &t);
  });
  return out;
}

void adam_step(const ParamRefs& params, const GradientBundle& grads, OptimizerState& state) {
  const auto& hp = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw InputError("adam_step: gradient for unknown parameter '" + name + "'");
    Tensor& p = *it->second;
    require_same_shape(p, g, "adam_step");
    auto& m = state.m.try_emplace(name, g.shape()).first->second;
    auto& v = state.v.try_emplace(name, g.shape()).first->second;
    require_same_shape(m, g, "adam_step");
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
      p[i] -= hp.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hp.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(clip > 0.0)) throw ConfigError("train.clip must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  penalty.validate();
}

namespace {

struct BatchOutcome {
  double ce = 0.0;       // summed over examples
  double penalty = 0.0;  // batch-level value
  GradientBundle grads;
};

BatchOutcome run_batch(const Model& model, const TrainConfig& cfg, std::span<const Example> data,
                       const std::vector<std::size_t>& indices, std::mt19937_64* dropout_rng) {
  BatchOutcome out{0.0, 0.0, model.zero_gradients()};
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (auto i : indices) {
    ad::Graph g;
    const auto fwd = model.forward(g, data[i], dropout_rng);
    auto ce = ad::cross_entropy(fwd.logits, data[i].label);
    auto pen = model.example_penalty(g, fwd, cfg.penalty);
    out.ce += ce.value().item();
    out.penalty += pen.value().item() * inv;
    g.backward_into(ad::add(ce, pen), out.grads, inv);
  }
  if (cfg.penalty.kind == PenaltyKind::Parameters) {
    ad::Graph g;
    auto pen = model.parameter_penalty(g, cfg.penalty);
    out.penalty += pen.value().item();
    g.backward_into(pen, out.grads);
  }
  return out;
}

}  // namespace

TrainResult train_model(Model model, const TrainConfig& config, std::span<const Example> train,
                        std::span<const Example> dev, const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw InputError("train_model: training set is empty");
  if (dev.empty()) throw InputError("train_model: dev set is empty");

  OptimizerState opt;
  opt.config.lr = config.lr;
  const auto params = trainable_refs(model);
  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x5bd1e995ULL);
  const bool use_dropout = model.config().encoder.dropout > 0.0;

  TrainResult result;
  bool have_best = false;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(train, config.batch_size, shuffle_rng());
    double ce_sum = 0.0, pen_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      auto outcome = run_batch(model, config, train, batch.indices, use_dropout ? &dropout_rng : nullptr);
      const double n = static_cast<double>(batch.size());
      const double loss = outcome.ce / n + outcome.penalty;
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b) + ", step " + std::to_string(step + 1));
      }
      if (step == 0) result.initial_penalty = outcome.penalty;
      const double norm = clip_grad_norm(outcome.grads, config.clip);
      adam_step(params, outcome.grads, opt);
      ++step;
      result.steps.push_back({epoch, step, loss, norm, norm > config.clip});
      ce_sum += outcome.ce;
      pen_sum += outcome.penalty * n;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_ce = ce_sum / static_cast<double>(train.size());
    m.train_penalty = pen_sum / static_cast<double>(train.size());
    m.train_loss = m.train_ce + m.train_penalty;
    m.dev_acc = evaluate(model, dev).accuracy;
    result.epochs.push_back(m);
    if (!have_best || m.dev_acc > result.best_dev_acc) {
      have_best = true;
      result.best = model;
      result.best_epoch = epoch;
      result.best_dev_acc = m.dev_acc;
    }
    if (on_epoch) on_epoch(m, model);
  }
  return result;
}

EvalResult evaluate(const Model& model, std::span<const Example> data) {
  if (data.empty()) throw InputError("evaluate: dataset is empty");
  const std::size_t k = model.config().num_classes;
  EvalResult r;
  r.class_total.assign(k, 0);
  r.class_correct.assign(k, 0);
  for (const auto& ex : data) {
    if (ex.label >= k) {
      throw InputError("evaluate: label " + std::to_string(ex.label) + " outside the model's " +
                       std::to_string(k) + " classes");
    }
    const bool hit = model.predict(ex) == ex.label;
    ++r.class_total[ex.label];
    r.class_correct[ex.label] += hit;
    r.correct += hit;
  }
  r.total = data.size();
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

std::string metrics_csv_header() { return "epoch,train_loss,train_ce,train_penalty,dev_acc"; }

std::string metrics_csv_row(const EpochMetrics& m) {
  std::string row = std::to_string(m.epoch);
  for (double v : {m.train_loss, m.train_ce, m.train_penalty, m.dev_acc}) {
    char buf[32];
    const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
    row += ',';
    row.append(buf, end);
  }
  return row;
}

}  // namespace gpool
