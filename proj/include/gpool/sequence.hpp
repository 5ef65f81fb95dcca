#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace gpool {

/// One tokenized sentence: vocabulary ids plus per-token character ids.
struct TokenSequence {
  std::vector<std::size_t> token_ids;
  std::vector<std::vector<std::size_t>> char_ids;

  std::size_t length() const { return token_ids.size(); }
  bool operator==(const TokenSequence&) const = default;
};

/// A labelled single sentence or sentence pair.
struct Example {
  TokenSequence sentence_a;
  std::optional<TokenSequence> sentence_b;
  std::size_t label = 0;

  bool is_pair() const { return sentence_b.has_value(); }
  bool operator==(const Example&) const = default;
};

}  // namespace gpool
