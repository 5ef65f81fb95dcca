#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gpool/data.hpp"
#include "gpool/model.hpp"
#include "gpool/training.hpp"

namespace gpool {

using json = nlohmann::json;

/// Where examples come from. `source` is "synthetic" or a dataset format.
struct DataConfig {
  std::string source = "synthetic";
  std::string train;
  std::string dev;
  std::string test;
  std::vector<std::string> labels;
  /// Pretrained vectors; empty means random initialization.
  std::string embeddings;
  bool lowercase = false;
  std::size_t min_count = 1;
  SyntheticConfig synthetic;
};

/// Everything a command needs. Vocabulary and alphabet sizes, class count
/// and the pair flag in `model` are filled in once data is loaded.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::string out = "runs/default";
};

std::vector<std::string> preset_names();
RunConfig preset(std::string_view name);

json to_json(const RunConfig& config);

/// Parses a config document. Every key must appear in `to_json(preset)`
/// with a compatible type; the first offending key is named in the error.
RunConfig run_config_from_json(const json& doc);

/// Throws ConfigError naming the dotted path of the first key in `value`
/// that is absent from `schema` or has an incompatible type.
void check_schema(const json& schema, const json& value, const std::string& path = "");

/// Model architecture including data-derived sizes, for checkpoints.
json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const json& doc);

}  // namespace gpool
