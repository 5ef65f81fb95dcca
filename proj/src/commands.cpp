#include "gpool/commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <sstream>
#include <thread>

#include "gpool/error.hpp"
#include "gpool/gradcheck.hpp"

namespace gpool {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<TextExample> text_split(const RunConfig& config, const std::string& split,
                                    std::vector<std::string>* labels = nullptr) {
  if (split != "train" && split != "dev" && split != "test")
    throw ConfigError("unknown split '" + split + "' (expected train, dev or test)");
  if (config.data.source == "synthetic") {
    auto s = gen_synthetic(config.data.synthetic);
    if (labels) *labels = s.labels;
    return split == "train" ? s.train : split == "dev" ? s.dev : s.test;
  }
  if (config.data.labels.empty()) throw ConfigError("data.labels must list the class names");
  if (labels) *labels = config.data.labels;
  const std::string& path = split == "train" ? config.data.train : split == "dev" ? config.data.dev : config.data.test;
  if (path.empty()) throw ConfigError("data." + split + " is not set");
  return load_dataset(path, parse_dataset_format(config.data.source), config.data.labels).examples;
}

Tensor random_tensor(Tensor::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

ad::Var weighted_sum(ad::Graph& g, ad::Var x, const Tensor& weights) {
  return ad::sum(ad::mul(x, g.constant_ref(weights)));
}

GradCheckRow row(const std::string& module, const LossBuilder& build, const ParamMap& params, double tol) {
  const auto report = check_gradients(build, params);
  const double err = report.max_relative_error();
  return {module, report.entries.size(), err, err < tol};
}

TokenSequence toy_sequence(std::span<const std::size_t> ids, std::size_t alphabet) {
  TokenSequence s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    s.token_ids.push_back(ids[i]);
    s.char_ids.push_back({2 + i % (alphabet - 2), 2 + (i + 1) % (alphabet - 2)});
  }
  return s;
}

void write_json(const std::string& path, const json& doc) { write_file_atomic(path, doc.dump(2) + "\n"); }

}  // namespace

PreparedData prepare_data(RunConfig& config) {
  PreparedData d;
  if (config.data.source == "synthetic") {
    auto s = gen_synthetic(config.data.synthetic);
    d.train_text = std::move(s.train);
    d.dev_text = std::move(s.dev);
    d.test_text = std::move(s.test);
    d.labels = std::move(s.labels);
  } else {
    d.train_text = text_split(config, "train", &d.labels);
    d.dev_text = text_split(config, "dev");
    if (!config.data.test.empty()) d.test_text = text_split(config, "test");
  }
  if (d.train_text.empty()) throw InputError("training split is empty");
  if (d.dev_text.empty()) throw InputError("dev split is empty");
  const bool lower = config.data.lowercase;
  d.vocab = build_vocab(corpus_of(d.train_text, lower), config.data.min_count);
  d.train = encode_examples(d.train_text, d.vocab, lower);
  d.dev = encode_examples(d.dev_text, d.vocab, lower);
  d.test = encode_examples(d.test_text, d.vocab, lower);

  auto& m = config.model;
  m.encoder.vocab_size = d.vocab.size();
  m.encoder.alphabet_size = d.vocab.alphabet_size();
  m.num_classes = d.labels.size();
  m.pair_task = d.train_text.front().sentence_b.has_value();
  return d;
}

std::vector<Example> load_split(const RunConfig& config, const Vocabulary& vocab, const std::string& split) {
  return encode_examples(text_split(config, split), vocab, config.data.lowercase);
}

Model build_model(const RunConfig& config, const PreparedData& data) {
  std::mt19937_64 rng(config.train.seed + 0x9e3779b97f4a7c15ULL);
  auto model = Model::init(config.model, rng);
  if (!config.data.embeddings.empty()) {
    model.encoder().word_table =
        load_embeddings(config.data.embeddings, data.vocab, config.train.seed, config.model.encoder.word_dim);
  }
  return model;
}

TrainArtifacts command_train(RunConfig config, std::ostream& log) {
  auto data = prepare_data(config);
  const auto model = build_model(config, data);

  TrainArtifacts out;
  out.config_path = join(config.out, "config.json");
  out.metrics_path = join(config.out, "metrics.csv");
  out.checkpoint_path = join(config.out, "model.ckpt");
  write_json(out.config_path, to_json(config));

  Checkpoint ckpt;
  ckpt.vocab = data.vocab;
  ckpt.labels = data.labels;
  ckpt.lowercase = config.data.lowercase;

  std::string csv = metrics_csv_header() + "\n";
  double best = -1.0;
  auto on_epoch = [&](const EpochMetrics& m, const Model& current) {
    csv += metrics_csv_row(m) + "\n";
    write_file_atomic(out.metrics_path, csv);
    char line[160];
    std::snprintf(line, sizeof line, "epoch %3zu  loss %.5f  ce %.5f  penalty %.5f  dev_acc %.4f", m.epoch,
                  m.train_loss, m.train_ce, m.train_penalty, m.dev_acc);
    log << line << std::endl;
    if (m.dev_acc > best) {
      best = m.dev_acc;
      ckpt.model = current;
      ckpt.info = {{"config", to_json(config)}, {"epoch", m.epoch}, {"dev_acc", m.dev_acc}};
      save_checkpoint(out.checkpoint_path, ckpt);
    }
  };
  out.result = train_model(model, config.train, data.train, data.dev, on_epoch);
  log << "best dev accuracy " << out.result.best_dev_acc << " at epoch " << out.result.best_epoch << "\n";
  return out;
}

EvalResult command_eval(const RunConfig& config, const std::string& checkpoint_path, const std::string& split,
                        std::ostream& log) {
  const auto ckpt = load_checkpoint(checkpoint_path);
  const auto examples = encode_examples(text_split(config, split), ckpt.vocab, ckpt.lowercase);
  const auto r = evaluate(ckpt.model, examples);
  json per_class = json::object();
  for (std::size_t k = 0; k < ckpt.labels.size(); ++k)
    per_class[ckpt.labels[k]] = {{"correct", r.class_correct[k]}, {"total", r.class_total[k]}};
  write_json(join(config.out, "eval.json"), {{"checkpoint", checkpoint_path},
                                              {"split", split},
                                              {"accuracy", r.accuracy},
                                              {"correct", r.correct},
                                              {"total", r.total},
                                              {"per_class", per_class}});
  log << split << " accuracy " << r.accuracy << " (" << r.correct << "/" << r.total << ")\n";
  return r;
}

std::vector<GradCheckRow> gradcheck_suite(std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckRow> rows;
  // Every hinge pair stays strictly inside the margin, away from the kink.
  const double lambda = 30.0, mu = 0.5;

  EncoderConfig ec;
  ec.vocab_size = 6;
  ec.word_dim = 2;
  ec.alphabet_size = 5;
  ec.char_dim = 2;
  ec.char_widths = {1, 3};
  ec.char_maps = 2;
  ec.hidden = 3;
  ec.layers = 2;
  const std::size_t ids[] = {2, 5, 3, 4};
  const auto seq = toy_sequence(ids, ec.alphabet_size);
  {
    auto p = EncoderParams::init(ec, rng);
    for (auto& layer : p.layers)
      for (auto& dir : layer) dir.bias = random_tensor(dir.bias.shape(), rng, -0.5, 0.5);
    EncoderParams scratch = p;
    const Tensor w = random_tensor({4, 6}, rng);
    rows.push_back(row("encoder",
                       struct_builder(scratch, [&](ad::Graph& g, const EncoderParams& q) {
                         return weighted_sum(g, encode_sequence(g, seq, q).states, w);
                       }),
                       trainable_map(p), tolerance));
  }

  const Tensor mask = Tensor::vector({1, 1, 1, 0});
  const Tensor w_pool = random_tensor({18}, rng);
  for (std::size_t heads = 1; heads <= 3; ++heads) {
    auto p = PoolingParams::init(heads, 6, 4, rng);
    for (auto& h : p.heads) {
      h.b1 = random_tensor({4}, rng, -0.5, 0.5);
      h.b2 = random_tensor({6}, rng, -0.5, 0.5);
    }
    auto map = trainable_map(p);
    map.emplace("H", random_tensor({4, 6}, rng));
    PoolingParams scratch = p;
    const Tensor w = Tensor::vector(std::vector<double>(w_pool.data().begin(), w_pool.data().begin() + 6 * heads));
    auto build = [&scratch, mask, w](ad::Graph& g, const ParamMap& m) {
      PoolingParams::visit(scratch, [&](const std::string& name, Tensor& t, bool) { t = m.at(name); });
      const HiddenSequence hidden{g.parameter("H", m.at("H")), mask};
      return weighted_sum(g, generalized_pool(hidden, bind_heads(g, scratch)).first.v, w);
    };
    rows.push_back(row("pooling (I=" + std::to_string(heads) + ")", build, map, tolerance));
  }

  {
    ParamMap map;
    for (std::size_t i = 0; i < 3; ++i) map.emplace("W1_" + std::to_string(i), random_tensor({4, 6}, rng, -0.2, 0.2));
    auto build = [&](ad::Graph& g, const ParamMap& m) {
      std::vector<ad::Var> w1;
      for (const auto& [name, t] : m) w1.push_back(g.parameter(name, t));
      return param_penalty(g, w1, lambda, mu);
    };
    rows.push_back(row("penalty: parameters", build, map, tolerance));
  }
  for (const auto kind : {PenaltyKind::Attention, PenaltyKind::Embeddings}) {
    auto p = PoolingParams::init(3, 6, 4, rng);
    auto map = trainable_map(p);
    map.emplace("H", random_tensor({4, 6}, rng));
    PoolingParams scratch = p;
    auto build = [&scratch, mask, kind, lambda, mu](ad::Graph& g, const ParamMap& m) {
      PoolingParams::visit(scratch, [&](const std::string& name, Tensor& t, bool) { t = m.at(name); });
      const HiddenSequence hidden{g.parameter("H", m.at("H")), mask};
      auto [pooled, maps] = generalized_pool(hidden, bind_heads(g, scratch));
      return kind == PenaltyKind::Attention ? attention_penalty(g, maps.heads, lambda, mu)
                                            : embedding_penalty(g, pooled.heads, lambda, mu);
    };
    rows.push_back(row("penalty: " + to_string(kind), build, map, tolerance));
  }

  {
    auto p = ClassifierParams::init({24, 4, 3}, rng);
    p.b_a = random_tensor({4}, rng, 0.1, 0.5);
    p.b_b = random_tensor({4}, rng, 0.1, 0.5);
    auto map = trainable_map(p);
    map.emplace("va", random_tensor({6}, rng));
    map.emplace("vb", random_tensor({6}, rng));
    ClassifierParams scratch = p;
    auto build = [&](ad::Graph& g, const ParamMap& m) {
      ClassifierParams::visit(scratch, [&](const std::string& name, Tensor& t, bool) { t = m.at(name); });
      const auto features = pair_features(g.parameter("va", m.at("va")), g.parameter("vb", m.at("vb")));
      return ad::cross_entropy(mlp_forward(g, features, scratch), 2);
    };
    rows.push_back(row("classifier", build, map, tolerance));
  }

  {
    ModelConfig mc;
    mc.encoder = ec;
    mc.encoder.layers = 1;
    mc.heads = 2;
    mc.attention_dim = 4;
    mc.mlp_hidden = 3;
    mc.num_classes = 3;
    mc.pair_task = true;
    const auto model = Model::init(mc, rng);
    ParamMap map;
    model.visit([&](const std::string& name, const Tensor& t, bool trainable) {
      if (trainable) map.emplace(name, t);
    });
    Example ex;
    ex.sentence_a = toy_sequence(std::span<const std::size_t>(ids, 3), ec.alphabet_size);
    ex.sentence_b = toy_sequence(std::span<const std::size_t>(ids + 1, 3), ec.alphabet_size);
    ex.label = 1;
    Model scratch = model;
    const PenaltyConfig penalty{PenaltyKind::Attention, lambda, mu};
    auto build = [&](ad::Graph& g, const ParamMap& m) {
      scratch.visit([&](const std::string& name, Tensor& t, bool) {
        if (auto it = m.find(name); it != m.end()) t = it->second;
      });
      const auto fwd = scratch.forward(g, ex);
      return ad::cross_entropy(fwd.logits, ex.label) + scratch.example_penalty(g, fwd, penalty);
    };
    rows.push_back(row("model (pair, attention penalty)", build, map, tolerance));
  }
  return rows;
}

std::vector<SweepRow> command_sweep_heads(const RunConfig& config, bool parallel, std::ostream& log) {
  if (config.model.pooling != PoolingKind::Generalized)
    throw ConfigError("sweep-heads needs model.pooling = generalized");
  std::vector<SweepRow> rows(kSweepHeads.size());
  std::vector<std::string> logs(kSweepHeads.size());
  std::vector<std::exception_ptr> errors(kSweepHeads.size());
  auto run_one = [&](std::size_t k) {
    try {
      RunConfig c = config;
      c.model.heads = kSweepHeads[k];
      c.out = join(config.out, "heads_" + std::to_string(kSweepHeads[k]));
      std::ostringstream sink;
      const auto art = command_train(c, sink);
      rows[k] = {kSweepHeads[k], art.result.best_epoch, art.result.best_dev_acc, art.metrics_path};
      logs[k] = sink.str();
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (parallel) {
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < kSweepHeads.size(); ++k) threads.emplace_back(run_one, k);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t k = 0; k < kSweepHeads.size(); ++k) {
      run_one(k);
      if (!errors[k]) log << "heads " << kSweepHeads[k] << ": best dev accuracy " << rows[k].best_dev_acc << "\n";
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::string csv = "heads,best_epoch,best_dev_acc,metrics\n";
  for (const auto& r : rows) {
    char acc[32];
    const auto end = std::to_chars(acc, acc + sizeof acc, r.best_dev_acc).ptr;
    csv += std::to_string(r.heads) + "," + std::to_string(r.best_epoch) + "," + std::string(acc, end) + "," +
           r.metrics_path + "\n";
  }
  write_file_atomic(join(config.out, "sweep.csv"), csv);
  if (parallel)
    for (const auto& r : rows) log << "heads " << r.heads << ": best dev accuracy " << r.best_dev_acc << "\n";
  return rows;
}

AttentionExport export_attention(const Checkpoint& ckpt, const std::vector<std::string>& tokens) {
  if (ckpt.model.config().pooling != PoolingKind::Generalized)
    throw ContractError("attention export needs a generalized-pooling checkpoint");
  if (tokens.empty()) throw InputError("cannot export attention for an empty sentence");
  ad::Graph g;
  const auto out = ckpt.model.encode(g, ckpt.vocab.encode(tokens));
  AttentionExport e;
  e.tokens = tokens;
  for (const auto& a : out.maps.heads) e.heads.push_back(a.value());
  return e;
}

json attention_to_json(const AttentionExport& maps) {
  json heads = json::array();
  for (const auto& a : maps.heads) {
    json rows = json::array();
    for (std::size_t t = 0; t < a.dim(0); ++t) {
      json r = json::array();
      for (std::size_t k = 0; k < a.dim(1); ++k) r.push_back(a.at(t, k));
      rows.push_back(std::move(r));
    }
    heads.push_back(std::move(rows));
  }
  const auto& first = maps.heads.front();
  return {{"tokens", maps.tokens}, {"heads", heads}, {"shape", {first.dim(0), first.dim(1)}}};
}

AttentionExport attention_from_json(const json& doc) {
  AttentionExport e;
  try {
    e.tokens = doc.at("tokens").get<std::vector<std::string>>();
    const auto shape = doc.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw FormatError("attention shape must have two entries");
    for (const auto& rows : doc.at("heads")) {
      Tensor a({shape[0], shape[1]});
      if (rows.size() != shape[0]) throw FormatError("attention head has the wrong number of rows");
      for (std::size_t t = 0; t < shape[0]; ++t) {
        const auto values = rows[t].get<std::vector<double>>();
        if (values.size() != shape[1]) throw FormatError("attention row has the wrong width");
        for (std::size_t k = 0; k < shape[1]; ++k) a.at(t, k) = values[k];
      }
      e.heads.push_back(std::move(a));
    }
  } catch (const json::exception& ex) {
    throw FormatError(std::string("attention export: ") + ex.what());
  }
  return e;
}

double mean_pairwise_frobenius(const std::vector<Tensor>& heads) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    for (std::size_t j = i + 1; j < heads.size(); ++j) {
      if (heads[i].shape() != heads[j].shape()) throw DimensionError("attention maps differ in shape");
      double s = 0.0;
      for (std::size_t k = 0; k < heads[i].size(); ++k) {
        const double d = heads[i][k] - heads[j][k];
        s += d * d;
      }
      total += std::sqrt(s);
      ++pairs;
    }
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

ExportSummary command_export_attention(const RunConfig& config, const std::string& checkpoint_path,
                                       const std::optional<std::string>& compare_path,
                                       const std::vector<std::string>& sentences, std::size_t limit,
                                       std::ostream& log) {
  std::vector<std::pair<std::string, Checkpoint>> ckpts;
  ckpts.emplace_back("checkpoint", load_checkpoint(checkpoint_path));
  if (compare_path) ckpts.emplace_back("compare", load_checkpoint(*compare_path));

  std::vector<std::string> texts = sentences;
  if (texts.empty()) {
    for (const auto& ex : text_split(config, "dev")) {
      if (texts.size() >= limit) break;
      texts.push_back(ex.sentence_a);
    }
  }
  if (texts.empty()) throw InputError("no sentences to export");

  const std::string dir = join(config.out, "attention");
  ExportSummary summary;
  summary.sentences = texts.size();
  json entries = json::array();
  std::vector<double> diversity(ckpts.size(), 0.0);
  for (std::size_t s = 0; s < texts.size(); ++s) {
    char name[48];
    std::snprintf(name, sizeof name, "sentence_%03zu.json", s);
    json entry = {{"sentence", texts[s]}};
    for (std::size_t c = 0; c < ckpts.size(); ++c) {
      const auto& [tag, ckpt] = ckpts[c];
      const auto maps = export_attention(ckpt, tokenize(texts[s], ckpt.lowercase));
      const double div = mean_pairwise_frobenius(maps.heads);
      diversity[c] += div;
      const auto path = join(join(dir, tag), name);
      write_json(path, attention_to_json(maps));
      entry[tag] = {{"file", path}, {"mean_pairwise_frobenius", div}};
    }
    entries.push_back(std::move(entry));
  }
  for (auto& d : diversity) d /= static_cast<double>(texts.size());
  summary.diversity = diversity[0];
  json doc = {{"sentences", entries},
              {"checkpoint", {{"path", checkpoint_path}, {"mean_pairwise_frobenius", diversity[0]}}}};
  log << "checkpoint: mean pairwise Frobenius distance " << diversity[0] << " over " << texts.size()
      << " sentences\n";
  if (compare_path) {
    summary.compare_diversity = diversity[1];
    doc["compare"] = {{"path", *compare_path}, {"mean_pairwise_frobenius", diversity[1]}};
    log << "compare:    mean pairwise Frobenius distance " << diversity[1] << "\n";
  }
  write_json(join(dir, "summary.json"), doc);
  return summary;
}

}  // namespace gpool
