#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "gpool/autodiff.hpp"

namespace gpool {

struct ClassifierConfig {
  std::size_t input_dim = 1;
  std::size_t hidden = 300;
  std::size_t num_classes = 2;

  void validate() const;
};

/// Two ReLU hidden layers with input-concatenation shortcuts and a linear
/// output layer:
///   h1 = ReLU(Wa x + ba)
///   h2 = ReLU(Wb [x; h1] + bb)
///   logits = Wo [x; h1; h2] + bo
struct ClassifierParams {
  ClassifierConfig config;
  Tensor w_a, b_a;  // [h x n], [h]
  Tensor w_b, b_b;  // [h x (n + h)], [h]
  Tensor w_o, b_o;  // [K x (n + 2h)], [K]

  static ClassifierParams init(const ClassifierConfig& config, std::mt19937_64& rng);

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(std::string("mlp.hidden1.weight"), self.w_a, true);
    f(std::string("mlp.hidden1.bias"), self.b_a, true);
    f(std::string("mlp.hidden2.weight"), self.w_b, true);
    f(std::string("mlp.hidden2.bias"), self.b_b, true);
    f(std::string("mlp.output.weight"), self.w_o, true);
    f(std::string("mlp.output.bias"), self.b_o, true);
  }
};

/// [va; vb; |va - vb|; va (.) vb].
ad::Var pair_features(ad::Var va, ad::Var vb);

ad::Var mlp_forward(ad::Graph& g, ad::Var features, const ClassifierParams& params);

}  // namespace gpool
