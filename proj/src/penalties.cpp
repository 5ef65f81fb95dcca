#include "gpool/penalties.hpp"

#include <algorithm>
#include <vector>

#include "gpool/error.hpp"

namespace gpool {

PenaltyKind parse_penalty_kind(std::string_view name) {
  if (name == "none") return PenaltyKind::None;
  if (name == "parameters") return PenaltyKind::Parameters;
  if (name == "attention") return PenaltyKind::Attention;
  if (name == "embeddings") return PenaltyKind::Embeddings;
  throw ConfigError("unknown penalty kind '" + std::string(name) +
                    "' (expected none, parameters, attention or embeddings)");
}

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::None: return "none";
    case PenaltyKind::Parameters: return "parameters";
    case PenaltyKind::Attention: return "attention";
    case PenaltyKind::Embeddings: return "embeddings";
  }
  return "?";
}

void PenaltyConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("penalty.lambda must be non-negative");
  if (!(mu >= 0.0)) throw ConfigError("penalty.mu must be non-negative");
}

ad::Var pairwise_hinge_penalty(ad::Graph& g, std::span<const ad::Var> items, double lambda,
                               double mu) {
  for (const auto& item : items) {
    if (item.shape() != items.front().shape()) {
      throw DimensionError("penalty: head shapes differ (" + shape_string(items.front().shape()) +
                           " vs " + shape_string(item.shape()) + ")");
    }
  }
  std::vector<ad::Var> terms;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      terms.push_back(ad::hinge(ad::sum_squares(ad::sub(items[i], items[j])), lambda));
    }
  }
  // Summing in value order makes the result bit-identical under any
  // permutation of the heads.
  std::stable_sort(terms.begin(), terms.end(),
                   [](const ad::Var& a, const ad::Var& b) { return a.value()[0] < b.value()[0]; });
  ad::Var total = g.constant(Tensor::scalar(0.0));
  for (const auto& term : terms) total = ad::add(total, term);
  return ad::scale(total, mu);
}

ad::Var param_penalty(ad::Graph& g, std::span<const ad::Var> w1, double lambda, double mu) {
  if (w1.empty()) throw InputError("param_penalty: at least one head is required");
  return pairwise_hinge_penalty(g, w1, lambda, mu);
}

ad::Var attention_penalty(ad::Graph& g, std::span<const ad::Var> maps, double lambda, double mu) {
  return pairwise_hinge_penalty(g, maps, lambda, mu);
}

ad::Var embedding_penalty(ad::Graph& g, std::span<const ad::Var> heads, double lambda, double mu) {
  return pairwise_hinge_penalty(g, heads, lambda, mu);
}

}  // namespace gpool
