#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gpool/sequence.hpp"
#include "gpool/tensor.hpp"

namespace gpool {

/// Whitespace tokenization, optionally lowercased (ASCII only).
std::vector<std::string> tokenize(std::string_view text, bool lowercase = false);

/// Token and character indices. Index 0 is padding and 1 is unknown in both.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  /// Rebuilds a vocabulary from its serialized parts; `tokens` and
  /// `alphabet` exclude the two reserved entries.
  static Vocabulary from_parts(const std::vector<std::string>& tokens,
                               const std::vector<unsigned char>& alphabet);

  std::size_t size() const { return tokens_.size(); }
  std::size_t alphabet_size() const { return alphabet_.size() + 2; }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  /// Tokens and characters without the reserved entries.
  std::vector<std::string> regular_tokens() const;
  const std::vector<unsigned char>& alphabet() const { return alphabet_; }

  std::size_t lookup(const std::string& token) const;
  std::size_t char_lookup(unsigned char c) const { return char_index_[c]; }
  TokenSequence encode(const std::vector<std::string>& tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<unsigned char> alphabet_;
  std::array<std::size_t, 256> char_index_{};
};

/// Tokens with count >= min_count ordered by descending frequency, ties
/// broken lexicographically. The alphabet covers every byte in the corpus.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count = 1);

/// Reads "token v1 v2 ..." lines. Rows for tokens in the file are copied,
/// every other row except padding is drawn from N(0, 0.1^2). A `dim` of 0
/// takes the width from the first line.
Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, std::uint64_t seed,
                       std::size_t dim = 0);
Tensor load_embeddings(std::istream& in, const Vocabulary& vocab, std::uint64_t seed,
                       std::size_t dim = 0);

enum class DatasetFormat { PairTsv, SingleTsv, Jsonl };

DatasetFormat parse_dataset_format(std::string_view name);
std::string to_string(DatasetFormat format);

/// An example before tokenization.
struct TextExample {
  std::string sentence_a;
  std::optional<std::string> sentence_b;
  std::size_t label = 0;

  bool operator==(const TextExample&) const = default;
};

struct TextDataset {
  std::vector<TextExample> examples;
  std::size_t blank_lines = 0;

  bool is_pair() const { return !examples.empty() && examples.front().sentence_b.has_value(); }
};

/// Labels are mapped to their index in `labels`.
TextDataset load_dataset(const std::string& path, DatasetFormat format,
                         const std::vector<std::string>& labels);
TextDataset parse_dataset(std::istream& in, DatasetFormat format, const std::vector<std::string>& labels);

void write_jsonl(std::ostream& out, std::span<const TextExample> examples,
                 const std::vector<std::string>& labels);

std::vector<Example> encode_examples(std::span<const TextExample> examples, const Vocabulary& vocab,
                                     bool lowercase = false);

/// Every tokenized sentence, for build_vocab.
std::vector<std::vector<std::string>> corpus_of(std::span<const TextExample> examples,
                                                bool lowercase = false);

enum class SyntheticTask { TwoTokenAgreement, PositionSum };

SyntheticTask parse_synthetic_task(std::string_view name);
std::string to_string(SyntheticTask task);

struct SyntheticConfig {
  SyntheticTask task = SyntheticTask::TwoTokenAgreement;
  std::size_t n = 2000;
  std::size_t min_length = 8;
  std::size_t max_length = 16;
  std::size_t vocab_size = 50;
  std::uint64_t seed = 7;
};

struct SyntheticSplits {
  std::vector<TextExample> train, dev, test;
  std::vector<std::string> labels;
};

/// two_token_agreement: markers m0..m3 at two distinct positions among
/// fillers, label (a + b) mod 4 over the marker indices, classes balanced.
/// position_sum: three digit tokens d0..d3 among fillers, label is the
/// bucketed digit sum. Splits are 80/10/10.
SyntheticSplits gen_synthetic(const SyntheticConfig& config);

/// One side of a batch padded to the longest sentence.
struct PaddedSide {
  std::vector<std::vector<std::size_t>> tokens;               // [B][T]
  std::vector<std::vector<std::vector<std::size_t>>> chars;   // [B][T][C]
  Tensor mask;                                                // [B x T]
  std::vector<std::size_t> lengths;
};

struct Batch {
  std::vector<std::size_t> indices;  // positions in the source dataset
  std::vector<std::size_t> labels;
  PaddedSide a;
  std::optional<PaddedSide> b;

  std::size_t size() const { return indices.size(); }
};

/// Consecutive batches in dataset order, or in a seeded shuffled order.
/// The final batch may be smaller.
std::vector<Batch> make_batches(std::span<const Example> examples, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

}  // namespace gpool
