#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gpool/commands.hpp"
#include "gpool/error.hpp"

namespace gpool {

namespace {

struct Flags {
  std::string config_path;
  std::string preset;
  std::size_t heads = 0;
  std::string pooling;
  std::string penalty;
  double mu = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string compare_checkpoint;
  std::string split = "dev";
  std::vector<std::string> sentences;
  std::size_t limit = 20;
  bool parallel = false;
};

void add_config_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON config file merged over the preset")->check(CLI::ExistingFile);
  sub->add_option("--preset", f.preset, "Base configuration")->check(CLI::IsMember(preset_names()));
  sub->add_option("--heads", f.heads, "Attention heads (I)")->check(CLI::PositiveNumber);
  sub->add_option("--pooling", f.pooling, "Pooling kind")
      ->check(CLI::IsMember({"generalized", "max", "mean", "last"}));
  sub->add_option("--penalty", f.penalty, "Redundancy penalty")
      ->check(CLI::IsMember({"none", "parameters", "attention", "embeddings"}));
  sub->add_option("--mu", f.mu, "Penalty weight")->check(CLI::NonNegativeNumber);
  sub->add_option("--lambda", f.lambda, "Penalty margin")->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", f.seed, "Training seed");
  sub->add_option("--epochs", f.epochs, "Training epochs")->check(CLI::PositiveNumber);
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--data", f.data, "Data source: synthetic, pair_tsv, single_tsv or jsonl");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

RunConfig resolve(const CLI::App& sub, const Flags& f, const std::optional<json>& stored) {
  json doc;
  if (!f.preset.empty())
    doc = to_json(preset(f.preset));
  else if (stored)
    doc = *stored;
  else
    doc = to_json(preset("synthetic"));
  if (!f.config_path.empty()) {
    const auto file = read_json_file(f.config_path);
    check_schema(to_json(preset("synthetic")), file);
    doc.merge_patch(file);
  }
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--heads")) doc["model"]["heads"] = f.heads;
  if (given("--pooling")) doc["model"]["pooling"] = f.pooling;
  if (given("--penalty")) doc["penalty"]["kind"] = f.penalty;
  if (given("--mu")) doc["penalty"]["mu"] = f.mu;
  if (given("--lambda")) doc["penalty"]["lambda"] = f.lambda;
  if (given("--seed")) doc["train"]["seed"] = f.seed;
  if (given("--epochs")) doc["train"]["epochs"] = f.epochs;
  if (given("--out")) doc["out"] = f.out;
  if (given("--data")) doc["data"]["source"] = f.data;
  return run_config_from_json(doc);
}

std::optional<json> stored_config(const std::string& checkpoint) {
  const auto info = load_checkpoint(checkpoint).info;
  if (info.contains("config")) return info.at("config");
  return std::nullopt;
}

int run_command(const std::string& name, const CLI::App& sub, const Flags& f, std::ostream& out) {
  if (name == "gradcheck") {
    const auto rows = gradcheck_suite(sub.count("--seed") ? f.seed : 1);
    bool ok = true;
    out << "module                            max rel error  status\n";
    for (const auto& r : rows) {
      char line[128];
      std::snprintf(line, sizeof line, "%-32s  %13.3e  %s\n", r.module.c_str(), r.max_relative_error,
                    r.passed ? "pass" : "FAIL");
      out << line;
      ok = ok && r.passed;
    }
    return ok ? 0 : 1;
  }
  if (name == "train") {
    const auto config = resolve(sub, f, std::nullopt);
    const auto art = command_train(config, out);
    out << "wrote " << art.checkpoint_path << ", " << art.metrics_path << ", " << art.config_path << "\n";
    return 0;
  }
  if (name == "sweep-heads") {
    const auto config = resolve(sub, f, std::nullopt);
    write_file_atomic((std::filesystem::path(config.out) / "config.json").string(), to_json(config).dump(2) + "\n");
    command_sweep_heads(config, f.parallel, out);
    return 0;
  }
  if (name == "eval") {
    const auto config = resolve(sub, f, stored_config(f.checkpoint));
    command_eval(config, f.checkpoint, f.split, out);
    return 0;
  }
  const auto config = resolve(sub, f, stored_config(f.checkpoint));
  std::optional<std::string> compare;
  if (!f.compare_checkpoint.empty()) compare = f.compare_checkpoint;
  command_export_attention(config, f.checkpoint, compare, f.sentences, f.limit, out);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sentence classifiers with generalized multi-head attention pooling", "gpool"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "Train a model; writes model.ckpt, metrics.csv and config.json");
  add_config_flags(train, f);

  auto* eval = app.add_subcommand("eval", "Score a checkpoint; writes eval.json");
  add_config_flags(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint to score")->required();
  eval->add_option("--split", f.split, "Split to score")->check(CLI::IsMember({"train", "dev", "test"}));

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  grad->add_option("--seed", f.seed, "Seed for the random instances");

  auto* sweep = app.add_subcommand("sweep-heads", "Train with 1, 3, 5, 7 and 9 heads");
  add_config_flags(sweep, f);
  sweep->add_flag("--parallel", f.parallel, "Run the head counts concurrently");

  auto* exp = app.add_subcommand("export-attention", "Write per-head attention matrices as JSON");
  add_config_flags(exp, f);
  exp->add_option("--checkpoint", f.checkpoint, "Checkpoint to inspect")->required();
  exp->add_option("--compare-checkpoint", f.compare_checkpoint, "Second checkpoint exported side by side");
  exp->add_option("--sentence", f.sentences, "Sentence to export (repeatable; default: dev sentences)");
  exp->add_option("--limit", f.limit, "Dev sentences exported when no --sentence is given");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const auto* sub = app.get_subcommands().front();
  try {
    return run_command(sub->get_name(), *sub, f, out);
  } catch (const ConfigError& e) {
    err << "error: invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gpool
