#include "gpool/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace gpool {

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.relative_error);
  return worst;
}

double relative_error(const Tensor& analytic, const Tensor& numeric) {
  require_same_shape(analytic, numeric, "relative_error");
  double diff = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - numeric[i];
    diff += d * d;
  }
  const double scale = std::max({std::sqrt(squared_norm(analytic)),
                                 std::sqrt(squared_norm(numeric)), 1e-6});
  return std::sqrt(diff) / scale;
}

GradCheckReport check_gradients(const LossBuilder& build, const ParamMap& params, double eps) {
  GradientBundle analytic;
  {
    ad::Graph g;
    analytic = g.backward(build(g, params));
  }
  GradCheckReport report;
  for (const auto& [name, value] : params) {
    ParamMap probe = params;
    auto f = [&](const Tensor& x) {
      probe.at(name) = x;
      ad::Graph g;
      return build(g, probe).value().item();
    };
    const Tensor numeric = finite_diff_grad(f, value, eps);
    auto it = analytic.find(name);
    const Tensor grad = it != analytic.end() ? it->second : Tensor(value.shape());
    report.entries.push_back({name, relative_error(grad, numeric)});
  }
  return report;
}

}  // namespace gpool
