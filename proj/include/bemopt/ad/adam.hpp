#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "bemopt/ad/tensor.hpp"

namespace bemopt::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  long step = 0;
  long skipped = 0;

  static AdamState for_parameters(std::span<Parameter* const> params) {
    AdamState s;
    for (const Parameter* p : params) {
      s.first_moment.push_back(Tensor::zeros_like(p->value));
      s.second_moment.push_back(Tensor::zeros_like(p->value));
    }
    return s;
  }
};

// Bias-corrected Adam update of every trainable parameter. A step whose
// gradients contain a non-finite value is skipped entirely and counted.
// Returns true when the update was applied.
inline bool adam_step(std::span<Parameter* const> params, std::span<const Tensor> grads, AdamState& state,
                      const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " + std::to_string(grads.size()) +
                     " gradients, " + std::to_string(state.first_moment.size()) + " moment slots");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->value.shape() || state.first_moment[i].shape() != params[i]->value.shape())
      throw ShapeError("adam_step: shape mismatch for '" + params[i]->name + "': parameter " +
                       shape_string(params[i]->value.shape()) + ", gradient " + shape_string(grads[i].shape()));
    if (params[i]->requires_grad && !grads[i].all_finite()) {
      ++state.skipped;
      return false;
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->requires_grad) continue;
    Tensor& x = params[i]->value;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      x[j] -= cfg.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.epsilon);
    }
  }
  return true;
}

}  // namespace bemopt::ad
