#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "bemopt/ad/graph.hpp"

namespace bemopt::ad {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;  // number of scalar entries compared
};

// Compares reverse-mode gradients of a scalar function against central
// differences (f(x+eps) - f(x-eps)) / 2eps, entry by entry, for every
// trainable parameter. The relative error of an entry is
// |a - n| / max(1e-8, |a| + |n|). `f` builds the function on the given graph.
template <typename F>
GradCheckResult grad_check(F&& f, std::span<Parameter* const> params, double eps = 1e-5) {
  auto evaluate = [&]() {
    Graph g(false);
    const double v = f(g).value().item();
    if (!std::isfinite(v)) throw NumericalError("grad_check: function value is not finite");
    return v;
  };
  std::vector<Tensor> analytic;
  {
    Graph g;
    const Var out = f(g);
    if (!std::isfinite(out.value().item())) throw NumericalError("grad_check: function value is not finite");
    g.backward(out);
    for (const Parameter* p : params) analytic.push_back(g.parameter_grad(*p));
  }
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.requires_grad) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = evaluate();
      p.value[i] = saved - eps;
      const double down = evaluate();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      res.max_relative_error = std::max(res.max_relative_error, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace bemopt::ad
