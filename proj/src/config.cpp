#include "gpool/config.hpp"

#include "gpool/error.hpp"

namespace gpool {

namespace {

const std::vector<std::string> kNliLabels = {"entailment", "neutral", "contradiction"};

RunConfig benchmark_preset(double lr, double clip, std::size_t batch, std::size_t layers, std::size_t d,
                       bool train_embeddings) {
  RunConfig c;
  auto& e = c.model.encoder;
  e.word_dim = 300;
  e.char_dim = 15;
  e.char_widths = {1, 3, 5};
  e.char_maps = 100;
  e.hidden = d;
  e.layers = layers;
  e.train_embeddings = train_embeddings;
  c.model.heads = 5;
  c.model.attention_dim = d;
  c.model.mlp_hidden = d;
  c.train.lr = lr;
  c.train.clip = clip;
  c.train.batch_size = batch;
  return c;
}

json encoder_section(const EncoderConfig& e) {
  return {{"word_dim", e.word_dim},   {"char_dim", e.char_dim},
          {"char_widths", e.char_widths}, {"char_maps", e.char_maps},
          {"hidden", e.hidden},       {"layers", e.layers},
          {"train_embeddings", e.train_embeddings}, {"dropout", e.dropout}};
}

void read_encoder_section(const json& j, EncoderConfig& e) {
  e.word_dim = j.at("word_dim").get<std::size_t>();
  e.char_dim = j.at("char_dim").get<std::size_t>();
  e.char_widths = j.at("char_widths").get<std::vector<std::size_t>>();
  e.char_maps = j.at("char_maps").get<std::size_t>();
  e.hidden = j.at("hidden").get<std::size_t>();
  e.layers = j.at("layers").get<std::size_t>();
  e.train_embeddings = j.at("train_embeddings").get<bool>();
  e.dropout = j.at("dropout").get<double>();
}

json model_section(const ModelConfig& m) {
  return {{"encoder", encoder_section(m.encoder)},
          {"pooling", to_string(m.pooling)},
          {"heads", m.heads},
          {"attention_dim", m.attention_dim},
          {"mlp_hidden", m.mlp_hidden}};
}

void read_model_section(const json& j, ModelConfig& m) {
  read_encoder_section(j.at("encoder"), m.encoder);
  m.pooling = parse_pooling_kind(j.at("pooling").get<std::string>());
  m.heads = j.at("heads").get<std::size_t>();
  m.attention_dim = j.at("attention_dim").get<std::size_t>();
  m.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
}

const char* type_name(const json& v) {
  if (v.is_number_unsigned()) return "non-negative integer";
  if (v.is_number()) return "number";
  return v.type_name();
}

bool compatible(const json& schema, const json& value) {
  if (schema.is_number_unsigned()) return value.is_number_unsigned();
  if (schema.is_number()) return value.is_number();
  if (schema.is_string()) return value.is_string();
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_array()) return value.is_array();
  if (schema.is_object()) return value.is_object();
  return schema.type() == value.type();
}

}  // namespace

std::vector<std::string> preset_names() { return {"snli", "multinli", "age", "yelp", "synthetic"}; }

RunConfig preset(std::string_view name) {
  RunConfig c;
  if (name == "snli") {
    c = benchmark_preset(4e-4, 10.0, 128, 3, 600, false);
    c.data.source = "pair_tsv";
    c.data.labels = kNliLabels;
  } else if (name == "multinli") {
    c = benchmark_preset(4e-4, 10.0, 32, 3, 300, false);
    c.data.source = "pair_tsv";
    c.data.labels = kNliLabels;
  } else if (name == "age") {
    c = benchmark_preset(2e-3, 0.5, 32, 1, 300, true);
    c.data.source = "single_tsv";
    c.data.labels = {"0", "1", "2", "3", "4"};
  } else if (name == "yelp") {
    c = benchmark_preset(1e-3, 0.5, 32, 1, 300, true);
    c.data.source = "single_tsv";
    c.data.labels = {"1", "2", "3", "4", "5"};
  } else if (name == "synthetic") {
    auto& e = c.model.encoder;
    e.word_dim = 32;
    e.char_maps = 0;
    e.hidden = 32;
    e.layers = 1;
    e.train_embeddings = true;
    c.model.heads = 5;
    c.model.attention_dim = 32;
    c.model.mlp_hidden = 64;
    c.train.lr = 1e-3;
    c.train.clip = 0.5;
    c.train.batch_size = 32;
    c.data.source = "synthetic";
  } else {
    throw ConfigError("unknown preset '" + std::string(name) +
                      "' (expected snli, multinli, age, yelp or synthetic)");
  }
  c.out = "runs/" + std::string(name);
  return c;
}

json to_json(const RunConfig& c) {
  const auto& s = c.data.synthetic;
  return {{"model", model_section(c.model)},
          {"train",
           {{"lr", c.train.lr},
            {"clip", c.train.clip},
            {"batch_size", c.train.batch_size},
            {"epochs", c.train.epochs},
            {"seed", c.train.seed}}},
          {"penalty",
           {{"kind", to_string(c.train.penalty.kind)},
            {"lambda", c.train.penalty.lambda},
            {"mu", c.train.penalty.mu}}},
          {"data",
           {{"source", c.data.source},
            {"train", c.data.train},
            {"dev", c.data.dev},
            {"test", c.data.test},
            {"labels", c.data.labels},
            {"embeddings", c.data.embeddings},
            {"lowercase", c.data.lowercase},
            {"min_count", c.data.min_count},
            {"synthetic",
             {{"task", to_string(s.task)},
              {"n", s.n},
              {"min_length", s.min_length},
              {"max_length", s.max_length},
              {"vocab_size", s.vocab_size},
              {"seed", s.seed}}}}},
          {"out", c.out}};
}

void check_schema(const json& schema, const json& value, const std::string& path) {
  const std::string where = path.empty() ? "<root>" : path;
  if (!compatible(schema, value)) {
    throw ConfigError("config key '" + where + "' must be a " + type_name(schema) + ", got " +
                      type_name(value));
  }
  if (schema.is_object()) {
    for (const auto& [key, v] : value.items()) {
      const std::string sub = path.empty() ? key : path + "." + key;
      if (!schema.contains(key)) throw ConfigError("unknown config key '" + sub + "'");
      check_schema(schema.at(key), v, sub);
    }
  } else if (schema.is_array() && !schema.empty()) {
    for (std::size_t i = 0; i < value.size(); ++i)
      check_schema(schema.front(), value[i], path + "[" + std::to_string(i) + "]");
  } else if (schema.is_array()) {
    for (std::size_t i = 0; i < value.size(); ++i)
      if (!value[i].is_string() && !value[i].is_number_unsigned())
        throw ConfigError("config key '" + path + "[" + std::to_string(i) + "]' has an unsupported type");
  }
}

RunConfig run_config_from_json(const json& doc) {
  check_schema(to_json(preset("synthetic")), doc);
  RunConfig c;
  try {
    read_model_section(doc.at("model"), c.model);
    const auto& t = doc.at("train");
    c.train.lr = t.at("lr").get<double>();
    c.train.clip = t.at("clip").get<double>();
    c.train.batch_size = t.at("batch_size").get<std::size_t>();
    c.train.epochs = t.at("epochs").get<std::size_t>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    const auto& p = doc.at("penalty");
    c.train.penalty.kind = parse_penalty_kind(p.at("kind").get<std::string>());
    c.train.penalty.lambda = p.at("lambda").get<double>();
    c.train.penalty.mu = p.at("mu").get<double>();
    const auto& d = doc.at("data");
    c.data.source = d.at("source").get<std::string>();
    c.data.train = d.at("train").get<std::string>();
    c.data.dev = d.at("dev").get<std::string>();
    c.data.test = d.at("test").get<std::string>();
    c.data.labels = d.at("labels").get<std::vector<std::string>>();
    c.data.embeddings = d.at("embeddings").get<std::string>();
    c.data.lowercase = d.at("lowercase").get<bool>();
    c.data.min_count = d.at("min_count").get<std::size_t>();
    const auto& s = d.at("synthetic");
    c.data.synthetic.task = parse_synthetic_task(s.at("task").get<std::string>());
    c.data.synthetic.n = s.at("n").get<std::size_t>();
    c.data.synthetic.min_length = s.at("min_length").get<std::size_t>();
    c.data.synthetic.max_length = s.at("max_length").get<std::size_t>();
    c.data.synthetic.vocab_size = s.at("vocab_size").get<std::size_t>();
    c.data.synthetic.seed = s.at("seed").get<std::uint64_t>();
    c.out = doc.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("incomplete config: ") + e.what());
  }
  if (c.data.source != "synthetic") parse_dataset_format(c.data.source);
  c.train.validate();
  return c;
}

json model_config_to_json(const ModelConfig& m) {
  json j = model_section(m);
  j["encoder"]["vocab_size"] = m.encoder.vocab_size;
  j["encoder"]["alphabet_size"] = m.encoder.alphabet_size;
  j["num_classes"] = m.num_classes;
  j["pair_task"] = m.pair_task;
  return j;
}

ModelConfig model_config_from_json(const json& doc) {
  ModelConfig m;
  try {
    read_model_section(doc, m);
    m.encoder.vocab_size = doc.at("encoder").at("vocab_size").get<std::size_t>();
    m.encoder.alphabet_size = doc.at("encoder").at("alphabet_size").get<std::size_t>();
    m.num_classes = doc.at("num_classes").get<std::size_t>();
    m.pair_task = doc.at("pair_task").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  m.validate();
  return m;
}

}  // namespace gpool
