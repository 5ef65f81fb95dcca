#include "gpool/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gpool/error.hpp"

namespace gpool {

using json = nlohmann::json;

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      std::string tok(text.substr(start, i - start));
      if (lowercase)
        for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(tok));
    }
  }
  return out;
}

// ---------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {
  index_.emplace("<pad>", kPad);
  index_.emplace("<unk>", kUnk);
  char_index_.fill(kUnk);
}

Vocabulary Vocabulary::from_parts(const std::vector<std::string>& tokens,
                                  const std::vector<unsigned char>& alphabet) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (!v.index_.emplace(t, v.tokens_.size()).second)
      throw InputError("vocabulary: duplicate token '" + t + "'");
    v.tokens_.push_back(t);
  }
  for (auto c : alphabet) {
    if (v.char_index_[c] != kUnk) throw InputError("vocabulary: duplicate character");
    v.char_index_[c] = v.alphabet_.size() + 2;
    v.alphabet_.push_back(c);
  }
  return v;
}

std::vector<std::string> Vocabulary::regular_tokens() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

std::size_t Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

TokenSequence Vocabulary::encode(const std::vector<std::string>& tokens) const {
  TokenSequence s;
  for (const auto& t : tokens) {
    s.token_ids.push_back(lookup(t));
    std::vector<std::size_t> chars;
    for (unsigned char c : t) chars.push_back(char_lookup(c));
    s.char_ids.push_back(std::move(chars));
  }
  return s;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  std::array<bool, 256> seen{};
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      ++counts[tok];
      for (unsigned char c : tok) seen[c] = true;
    }
  }
  if (counts.empty()) throw InputError("build_vocab: corpus has no tokens");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= std::max<std::size_t>(min_count, 1)) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens;
  for (auto& [tok, n] : kept)
    if (tok != "<pad>" && tok != "<unk>") tokens.push_back(tok);
  std::vector<unsigned char> alphabet;
  for (std::size_t c = 0; c < 256; ++c)
    if (seen[c]) alphabet.push_back(static_cast<unsigned char>(c));
  return Vocabulary::from_parts(tokens, alphabet);
}

// ---------------------------------------------------------------- embeddings

Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, std::uint64_t seed,
                       std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw InputError("load_embeddings: cannot open '" + path + "'");
  return load_embeddings(in, vocab, seed, dim);
}

Tensor load_embeddings(std::istream& in, const Vocabulary& vocab, std::uint64_t seed, std::size_t dim) {
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  std::size_t width = dim, width_line = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = tokenize(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) throw ParseError("load_embeddings: token without vector components", line_no);
    std::vector<double> values;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      double v = 0.0;
      const auto& f = fields[k];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError("load_embeddings: component '" + f + "' is not a number", line_no);
      values.push_back(v);
    }
    if (width == 0) {
      width = values.size();
      width_line = line_no;
    } else if (values.size() != width) {
      if (dim != 0) {
        throw ParseError("load_embeddings: expected " + std::to_string(dim) + " components, found " +
                             std::to_string(values.size()),
                         line_no);
      }
      throw FormatError("load_embeddings: line " + std::to_string(line_no) + " has " +
                        std::to_string(values.size()) + " components but line " +
                        std::to_string(width_line) + " has " + std::to_string(width));
    }
    const std::size_t index = vocab.lookup(fields[0]);
    if (index == Vocabulary::kUnk && fields[0] != "<unk>") continue;
    rows.emplace_back(index, std::move(values));
  }
  if (width == 0) throw FormatError("load_embeddings: no vectors found and no width given");

  Tensor table({vocab.size(), width});
  std::vector<bool> found(vocab.size(), false);
  for (auto& [index, values] : rows) {
    if (found[index] || index == Vocabulary::kPad) continue;
    found[index] = true;
    std::copy(values.begin(), values.end(), &table.at(index, 0));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.1);
  for (std::size_t r = 1; r < vocab.size(); ++r) {
    if (found[r]) continue;
    for (std::size_t c = 0; c < width; ++c) table.at(r, c) = gauss(rng);
  }
  return table;
}

// ---------------------------------------------------------------- datasets

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "pair_tsv") return DatasetFormat::PairTsv;
  if (name == "single_tsv") return DatasetFormat::SingleTsv;
  if (name == "jsonl") return DatasetFormat::Jsonl;
  throw ConfigError("unknown dataset format '" + std::string(name) +
                    "' (expected pair_tsv, single_tsv or jsonl)");
}

std::string to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::PairTsv: return "pair_tsv";
    case DatasetFormat::SingleTsv: return "single_tsv";
    case DatasetFormat::Jsonl: return "jsonl";
  }
  return "?";
}

namespace {

std::size_t label_index(const std::string& label, const std::vector<std::string>& labels,
                        std::size_t line) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end())
    throw DataError("unknown label '" + label + "' (line " + std::to_string(line) + ")");
  return static_cast<std::size_t>(it - labels.begin());
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

TextExample parse_json_line(const std::string& line, const std::vector<std::string>& labels,
                            std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
  }
  if (!obj.is_object()) throw ParseError("expected a JSON object", line_no);
  for (const char* key : {"label", "sentence_a"}) {
    if (!obj.contains(key) || !obj[key].is_string())
      throw ParseError(std::string("missing string field \"") + key + "\"", line_no);
  }
  TextExample ex;
  ex.sentence_a = obj["sentence_a"].get<std::string>();
  if (obj.contains("sentence_b")) {
    if (!obj["sentence_b"].is_string()) throw ParseError("field \"sentence_b\" must be a string", line_no);
    ex.sentence_b = obj["sentence_b"].get<std::string>();
  }
  ex.label = label_index(obj["label"].get<std::string>(), labels, line_no);
  return ex;
}

}  // namespace

TextDataset load_dataset(const std::string& path, DatasetFormat format,
                         const std::vector<std::string>& labels) {
  std::ifstream in(path);
  if (!in) throw InputError("load_dataset: cannot open '" + path + "'");
  return parse_dataset(in, format, labels);
}

TextDataset parse_dataset(std::istream& in, DatasetFormat format, const std::vector<std::string>& labels) {
  if (labels.empty()) throw ConfigError("load_dataset: the label list is empty");
  TextDataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      ++out.blank_lines;
      continue;
    }
    TextExample ex;
    if (format == DatasetFormat::Jsonl) {
      ex = parse_json_line(line, labels, line_no);
    } else {
      const auto fields = split_tabs(line);
      const std::size_t want = format == DatasetFormat::PairTsv ? 3 : 2;
      if (fields.size() != want) {
        throw ParseError("expected " + std::to_string(want) + " tab-separated fields, found " +
                             std::to_string(fields.size()),
                         line_no);
      }
      ex.label = label_index(fields[0], labels, line_no);
      ex.sentence_a = fields[1];
      if (want == 3) ex.sentence_b = fields[2];
    }
    if (!out.examples.empty() && out.examples.front().sentence_b.has_value() != ex.sentence_b.has_value())
      throw DataError("mixed single-sentence and pair examples (line " + std::to_string(line_no) + ")");
    out.examples.push_back(std::move(ex));
  }
  return out;
}

void write_jsonl(std::ostream& out, std::span<const TextExample> examples,
                 const std::vector<std::string>& labels) {
  for (const auto& ex : examples) {
    json obj;
    obj["label"] = labels.at(ex.label);
    obj["sentence_a"] = ex.sentence_a;
    if (ex.sentence_b) obj["sentence_b"] = *ex.sentence_b;
    out << obj.dump() << '\n';
  }
}

std::vector<Example> encode_examples(std::span<const TextExample> examples, const Vocabulary& vocab,
                                     bool lowercase) {
  std::vector<Example> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    Example e;
    e.sentence_a = vocab.encode(tokenize(ex.sentence_a, lowercase));
    if (ex.sentence_b) e.sentence_b = vocab.encode(tokenize(*ex.sentence_b, lowercase));
    e.label = ex.label;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::vector<std::string>> corpus_of(std::span<const TextExample> examples, bool lowercase) {
  std::vector<std::vector<std::string>> out;
  for (const auto& ex : examples) {
    out.push_back(tokenize(ex.sentence_a, lowercase));
    if (ex.sentence_b) out.push_back(tokenize(*ex.sentence_b, lowercase));
  }
  return out;
}

// ---------------------------------------------------------------- synthetic

SyntheticTask parse_synthetic_task(std::string_view name) {
  if (name == "two_token_agreement") return SyntheticTask::TwoTokenAgreement;
  if (name == "position_sum") return SyntheticTask::PositionSum;
  throw ConfigError("unknown synthetic task '" + std::string(name) +
                    "' (expected two_token_agreement or position_sum)");
}

std::string to_string(SyntheticTask task) {
  return task == SyntheticTask::TwoTokenAgreement ? "two_token_agreement" : "position_sum";
}

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::size_t sum_bucket(std::size_t sum) {
  if (sum <= 3) return 0;
  if (sum <= 5) return sum - 3;
  return 3;
}

}  // namespace

SyntheticSplits gen_synthetic(const SyntheticConfig& config) {
  constexpr std::size_t kSymbols = 4;
  const bool agreement = config.task == SyntheticTask::TwoTokenAgreement;
  const std::size_t marked = agreement ? 2 : 3;
  if (config.n < 30) throw InputError("gen_synthetic: n must be at least 30");
  if (config.vocab_size < kSymbols) throw InputError("gen_synthetic: vocab_size must be at least 4");
  if (config.min_length > config.max_length)
    throw InputError("gen_synthetic: min_length exceeds max_length");
  if (config.min_length < marked) {
    throw InputError("gen_synthetic: sequences of length " + std::to_string(config.min_length) +
                     " cannot hold " + std::to_string(marked) + " marked tokens");
  }

  std::mt19937_64 rng(config.seed);
  const std::size_t fillers = std::max<std::size_t>(1, config.vocab_size - kSymbols);
  std::uniform_int_distribution<std::size_t> length(config.min_length, config.max_length);
  std::uniform_int_distribution<std::size_t> filler(0, fillers - 1);
  std::uniform_int_distribution<std::size_t> symbol(0, kSymbols - 1);
  const char* prefix = agreement ? "m" : "d";

  std::vector<TextExample> all;
  all.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const std::size_t steps = length(rng);
    std::vector<std::string> tokens(steps);
    for (auto& t : tokens) t = "w" + std::to_string(filler(rng));
    std::vector<std::size_t> positions(steps);
    std::iota(positions.begin(), positions.end(), 0);
    std::shuffle(positions.begin(), positions.end(), rng);

    std::vector<std::size_t> symbols(marked);
    std::size_t label = 0;
    if (agreement) {
      label = i % kSymbols;
      symbols[0] = symbol(rng);
      symbols[1] = (label + kSymbols - symbols[0]) % kSymbols;
    } else {
      std::size_t sum = 0;
      for (auto& s : symbols) sum += (s = symbol(rng));
      label = sum_bucket(sum);
    }
    for (std::size_t k = 0; k < marked; ++k) tokens[positions[k]] = prefix + std::to_string(symbols[k]);
    all.push_back({join(tokens), std::nullopt, label});
  }
  std::shuffle(all.begin(), all.end(), rng);

  SyntheticSplits out;
  const std::size_t n_train = config.n * 8 / 10, n_dev = config.n / 10;
  out.train.assign(all.begin(), all.begin() + n_train);
  out.dev.assign(all.begin() + n_train, all.begin() + n_train + n_dev);
  out.test.assign(all.begin() + n_train + n_dev, all.end());
  for (std::size_t k = 0; k < kSymbols; ++k) out.labels.push_back("c" + std::to_string(k));
  return out;
}

// ---------------------------------------------------------------- batching

namespace {

PaddedSide pad_side(const std::vector<const TokenSequence*>& seqs) {
  PaddedSide side;
  std::size_t steps = 0, chars = 0;
  for (const auto* s : seqs) {
    steps = std::max(steps, s->length());
    for (const auto& c : s->char_ids) chars = std::max(chars, c.size());
  }
  side.mask = Tensor({seqs.size(), std::max<std::size_t>(steps, 1)});
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto& s = *seqs[b];
    std::vector<std::size_t> row(steps, Vocabulary::kPad);
    std::vector<std::vector<std::size_t>> char_row(steps, std::vector<std::size_t>(chars, Vocabulary::kPad));
    for (std::size_t t = 0; t < s.length(); ++t) {
      row[t] = s.token_ids[t];
      side.mask.at(b, t) = 1.0;
      if (t < s.char_ids.size()) std::copy(s.char_ids[t].begin(), s.char_ids[t].end(), char_row[t].begin());
    }
    side.tokens.push_back(std::move(row));
    side.chars.push_back(std::move(char_row));
    side.lengths.push_back(s.length());
  }
  return side;
}

}  // namespace

std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1) throw InputError("make_batches: batch_size must be at least 1");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch batch;
    batch.indices.assign(order.begin() + start, order.begin() + std::min(order.size(), start + batch_size));
    std::vector<const TokenSequence*> a, b;
    for (auto i : batch.indices) {
      const auto& ex = examples[i];
      if (ex.sentence_a.length() == 0 || (ex.sentence_b && ex.sentence_b->length() == 0))
        throw InputError("make_batches: example " + std::to_string(i) + " has an empty sentence");
      batch.labels.push_back(ex.label);
      a.push_back(&ex.sentence_a);
      if (ex.sentence_b) b.push_back(&*ex.sentence_b);
    }
    if (!b.empty() && b.size() != a.size())
      throw InputError("make_batches: batch mixes pair and single-sentence examples");
    batch.a = pad_side(a);
    if (!b.empty()) batch.b = pad_side(b);
    out.push_back(std::move(batch));
  }
  return out;
}

}  // namespace gpool
