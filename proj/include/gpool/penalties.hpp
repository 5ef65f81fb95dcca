#pragma once

#include <span>
#include <string>
#include <string_view>

#include "gpool/autodiff.hpp"

namespace gpool {

/// Which redundancy term is added to the loss; at most one per run.
enum class PenaltyKind { None, Parameters, Attention, Embeddings };

PenaltyKind parse_penalty_kind(std::string_view name);
std::string to_string(PenaltyKind kind);

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::None;
  double lambda = 1.0;
  double mu = 1e-2;

  void validate() const;
};

/// mu * sum_{i<j} max(lambda - ||X^i - X^j||^2, 0) over same-shaped tensors.
/// The hinge subgradient at ||.||^2 == lambda is 0. Empty or single-element
/// inputs contribute exactly 0.
ad::Var pairwise_hinge_penalty(ad::Graph& g, std::span<const ad::Var> items, double lambda,
                               double mu);

/// Hinge penalty on the heads' first-layer attention weights W1^i.
ad::Var param_penalty(ad::Graph& g, std::span<const ad::Var> w1, double lambda, double mu);

/// Hinge penalty on one sentence's attention matrices A^i.
ad::Var attention_penalty(ad::Graph& g, std::span<const ad::Var> maps, double lambda, double mu);

/// Hinge penalty on one sentence's per-head embeddings v^i.
ad::Var embedding_penalty(ad::Graph& g, std::span<const ad::Var> heads, double lambda, double mu);

}  // namespace gpool
