#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gpool/autodiff.hpp"

namespace gpool {

using ParamMap = std::map<std::string, Tensor>;

/// Builds a scalar loss, binding every entry of the map with
/// Graph::parameter(name, map.at(name)).
using LossBuilder = std::function<ad::Var(ad::Graph&, const ParamMap&)>;

struct GradCheckEntry {
  std::string parameter;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error() const;
};

/// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-6).
double relative_error(const Tensor& analytic, const Tensor& numeric);

/// Compares reverse-mode gradients of `build` against central differences,
/// one parameter tensor at a time.
GradCheckReport check_gradients(const LossBuilder& build, const ParamMap& params,
                                double eps = 1e-5);

/// Trainable tensors of a parameter struct exposing a static visit().
template <class Params>
ParamMap trainable_map(const Params& params) {
  ParamMap out;
  Params::visit(params, [&](const std::string& name, const Tensor& t, bool trainable) {
    if (trainable) out.emplace(name, t);
  });
  return out;
}

/// Adapts a forward function over a parameter struct to a LossBuilder: each
/// build copies the map's values into `scratch`, which must outlive the
/// check. Names the struct binds must match the map keys.
template <class Params, class Fn>
LossBuilder struct_builder(Params& scratch, Fn fn) {
  return [&scratch, fn](ad::Graph& g, const ParamMap& m) {
    Params::visit(scratch, [&](const std::string& name, Tensor& t, bool) {
      if (auto it = m.find(name); it != m.end()) t = it->second;
    });
    return fn(g, static_cast<const Params&>(scratch));
  };
}

}  // namespace gpool
