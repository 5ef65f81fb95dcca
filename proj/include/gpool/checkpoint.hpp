#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gpool/data.hpp"
#include "gpool/model.hpp"

namespace gpool {

/// A trained model with what is needed to encode new text for it.
struct Checkpoint {
  Model model;
  Vocabulary vocab;
  std::vector<std::string> labels;
  bool lowercase = false;
  /// Free-form provenance stored alongside (resolved run config, epoch...).
  nlohmann::json info = nlohmann::json::object();
};

/// Binary layout: magic "GPOOLCKP", u32 version, u64 metadata length, JSON
/// metadata, u64 tensor count, then per tensor u32 name length, name, u32
/// rank, u64 extents, little-endian doubles; terminated by "GPOOLEND".
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace gpool
