#include "gpool/classifier.hpp"

#include "gpool/encoder.hpp"
#include "gpool/error.hpp"

namespace gpool {

void ClassifierConfig::validate() const {
  if (input_dim < 1) throw ConfigError("classifier: input_dim must be positive");
  if (hidden < 1) throw ConfigError("classifier: hidden must be positive");
  if (num_classes < 2) throw ConfigError("classifier: at least two classes are required");
}

ClassifierParams ClassifierParams::init(const ClassifierConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t n = config.input_dim, h = config.hidden, k = config.num_classes;
  ClassifierParams p;
  p.config = config;
  p.w_a = glorot_uniform(h, n, rng);
  p.b_a = Tensor({h});
  p.w_b = glorot_uniform(h, n + h, rng);
  p.b_b = Tensor({h});
  p.w_o = glorot_uniform(k, n + 2 * h, rng);
  p.b_o = Tensor({k});
  return p;
}

ad::Var pair_features(ad::Var va, ad::Var vb) {
  if (va.shape() != vb.shape() || va.value().rank() != 1) {
    throw InputError("pair_features: embeddings must be vectors of equal length, got " +
                     shape_string(va.shape()) + " and " + shape_string(vb.shape()));
  }
  const ad::Var parts[] = {va, vb, ad::abs(ad::sub(va, vb)), ad::mul(va, vb)};
  return ad::concat(parts);
}

ad::Var mlp_forward(ad::Graph& g, ad::Var features, const ClassifierParams& params) {
  const auto& x = features.value();
  if (x.rank() != 1 || x.size() != params.config.input_dim) {
    throw InputError("mlp_forward: expected features of length " +
                     std::to_string(params.config.input_dim) + ", got " + shape_string(x.shape()));
  }
  auto h1 = ad::relu(ad::add(ad::matvec(g.parameter("mlp.hidden1.weight", params.w_a), features),
                             g.parameter("mlp.hidden1.bias", params.b_a)));
  const ad::Var in2[] = {features, h1};
  auto h2 = ad::relu(ad::add(ad::matvec(g.parameter("mlp.hidden2.weight", params.w_b), ad::concat(in2)),
                             g.parameter("mlp.hidden2.bias", params.b_b)));
  const ad::Var in3[] = {features, h1, h2};
  return ad::add(ad::matvec(g.parameter("mlp.output.weight", params.w_o), ad::concat(in3)),
                 g.parameter("mlp.output.bias", params.b_o));
}

}  // namespace gpool
