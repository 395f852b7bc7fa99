#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "bemopt/core/matrix.hpp"

namespace bemopt::model {

struct AttentionResult {
  std::vector<double> output;   // value_dim
  std::vector<double> weights;  // one per key row, sums to 1
};

// Single-query scaled dot-product attention over the rows of `keys`/`values`
// (the positions of one window): weights = softmax(keys * query / sqrt(key_dim)).
inline AttentionResult attend(std::span<const double> query, const Matrix& keys, const Matrix& values) {
  if (keys.rows() == 0 || keys.rows() != values.rows() || keys.cols() != query.size())
    throw ShapeError("attend: query width " + std::to_string(query.size()) + ", keys " + std::to_string(keys.rows()) + "x" +
                     std::to_string(keys.cols()) + ", values " + std::to_string(values.rows()) + "x" +
                     std::to_string(values.cols()));
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(query.size()));
  AttentionResult r;
  r.weights.resize(keys.rows());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < keys.rows(); ++l) {
    double s = 0;
    for (std::size_t i = 0; i < query.size(); ++i) s += query[i] * keys(l, i);
    r.weights[l] = s * inv_scale;
    mx = std::max(mx, r.weights[l]);
  }
  double total = 0;
  for (double& w : r.weights) total += (w = std::exp(w - mx));
  for (double& w : r.weights) w /= total;
  r.output.assign(values.cols(), 0.0);
  for (std::size_t l = 0; l < values.rows(); ++l)
    for (std::size_t i = 0; i < values.cols(); ++i) r.output[i] += r.weights[l] * values(l, i);
  return r;
}

}  // namespace bemopt::model
