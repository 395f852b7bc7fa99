#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "bemopt/ad/graph.hpp"

// Differentiable primitives. Every op checks operand shapes, computes the
// forward value and registers its backward rule on the operands' graph.

namespace bemopt::ad {

namespace detail {

[[noreturn]] inline void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

inline Graph& same_graph(const Var& a, const Var& b) {
  if (&a.graph() != &b.graph()) throw Error("operands belong to different graphs");
  return a.graph();
}

inline void accumulate(Graph& g, const Var& v, const Tensor& delta) {
  if (!g.requires_grad(v.id())) return;
  Tensor& gr = g.grad(v.id());
  for (std::size_t i = 0; i < gr.size(); ++i) gr[i] += delta[i];
}

}  // namespace detail

// [m x k] * [k x n] -> [m x n]
inline Var matmul(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) detail::shape_mismatch("matmul", av.shape(), bv.shape());
  Tensor out({av.rows(), bv.cols()});
  out.map().noalias() = av.map() * bv.map();
  return g.make(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a.id())) g.grad(a.id()).map().noalias() += go.map() * b.value().map().transpose();
    if (g.requires_grad(b.id())) g.grad(b.id()).map().noalias() += a.value().map().transpose() * go.map();
  });
}

inline Var add(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  if (a.shape() != b.shape()) detail::shape_mismatch("add", a.shape(), b.shape());
  Tensor out = a.value();
  out.map() += b.value().map();
  return g.make(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    detail::accumulate(g, a, go);
    detail::accumulate(g, b, go);
  });
}

inline Var sub(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  if (a.shape() != b.shape()) detail::shape_mismatch("sub", a.shape(), b.shape());
  Tensor out = a.value();
  out.map() -= b.value().map();
  return g.make(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    detail::accumulate(g, a, go);
    if (g.requires_grad(b.id())) g.grad(b.id()).map() -= go.map();
  });
}

// Elementwise product.
inline Var mul(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  if (a.shape() != b.shape()) detail::shape_mismatch("mul", a.shape(), b.shape());
  Tensor out = a.value();
  out.map().array() *= b.value().map().array();
  return g.make(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a.id())) g.grad(a.id()).map().array() += go.map().array() * b.value().map().array();
    if (g.requires_grad(b.id())) g.grad(b.id()).map().array() += go.map().array() * a.value().map().array();
  });
}

inline Var scale(const Var& a, double s) {
  Graph& g = a.graph();
  Tensor out = a.value();
  out.map() *= s;
  return g.make(std::move(out), {a}, [a, s](Graph& g, std::size_t self) {
    if (g.requires_grad(a.id())) g.grad(a.id()).map() += s * g.grad(self).map();
  });
}

// Adds a bias row [n] (or [1 x n]) to every row of a [m x n] matrix.
inline Var add_bias(const Var& a, const Var& bias) {
  Graph& g = detail::same_graph(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (av.rank() != 2 || bv.rows() != 1 || bv.cols() != av.cols() || bv.rank() == 0)
    detail::shape_mismatch("add_bias", av.shape(), bv.shape());
  Tensor out = av;
  out.map().rowwise() += bv.map().row(0);
  return g.make(std::move(out), {a, bias}, [a, bias](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    detail::accumulate(g, a, go);
    if (g.requires_grad(bias.id())) g.grad(bias.id()).map().row(0) += go.map().colwise().sum();
  });
}

inline Var relu(const Var& a) {
  Graph& g = a.graph();
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return g.make(std::move(out), {a}, [a](Graph& g, std::size_t self) {
    if (!g.requires_grad(a.id())) return;
    const Tensor& go = g.grad(self);
    const Tensor& x = a.value();
    Tensor& ga = g.grad(a.id());
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0.0) ga[i] += go[i];
  });
}

inline Var square(const Var& a) {
  Graph& g = a.graph();
  Tensor out = a.value();
  out.map().array() = out.map().array().square();
  return g.make(std::move(out), {a}, [a](Graph& g, std::size_t self) {
    if (g.requires_grad(a.id())) g.grad(a.id()).map().array() += 2.0 * a.value().map().array() * g.grad(self).map().array();
  });
}

// Square root; the gradient at 0 is taken as 0.
inline Var sqrt(const Var& a) {
  Graph& g = a.graph();
  Tensor out = a.value();
  for (double& v : out.values()) {
    if (v < 0.0) throw NumericalError("sqrt of negative value " + std::to_string(v));
    v = std::sqrt(v);
  }
  return g.make(std::move(out), {a}, [a](Graph& g, std::size_t self) {
    if (!g.requires_grad(a.id())) return;
    const Tensor& y = g.value(self);
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad(a.id());
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] > 0.0) ga[i] += go[i] / (2.0 * y[i]);
  });
}

inline Var log1p(const Var& a) {
  Graph& g = a.graph();
  Tensor out = a.value();
  for (double& v : out.values()) {
    if (!(v > -1.0)) throw NumericalError("log1p of value <= -1: " + std::to_string(v));
    v = std::log1p(v);
  }
  return g.make(std::move(out), {a}, [a](Graph& g, std::size_t self) {
    if (g.requires_grad(a.id())) g.grad(a.id()).map().array() += g.grad(self).map().array() / (1.0 + a.value().map().array());
  });
}

// Softmax along `axis` (0: down columns, 1 or -1: along rows; rank-1 inputs use their only axis).
inline Var softmax(const Var& a, int axis = -1) {
  Graph& g = a.graph();
  const Tensor& x = a.value();
  const bool along_rows = x.rank() < 2 || axis != 0;
  if (axis < -1 || axis > 1 || (x.rank() < 2 && axis == 1 && x.rank() == 0))
    throw ShapeError("softmax: invalid axis " + std::to_string(axis) + " for shape " + shape_string(x.shape()));
  Tensor out = x;
  const std::size_t rows = x.rows(), cols = x.cols();
  const std::size_t lines = along_rows ? rows : cols, len = along_rows ? cols : rows;
  auto at = [&](Tensor& t, std::size_t line, std::size_t i) -> double& {
    return along_rows ? t(line, i) : t(i, line);
  };
  for (std::size_t l = 0; l < lines; ++l) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, at(out, l, i));
    double sum = 0;
    for (std::size_t i = 0; i < len; ++i) {
      double& v = at(out, l, i);
      v = std::exp(v - mx);
      sum += v;
    }
    for (std::size_t i = 0; i < len; ++i) at(out, l, i) /= sum;
  }
  return g.make(std::move(out), {a}, [a, along_rows, lines, len](Graph& g, std::size_t self) {
    if (!g.requires_grad(a.id())) return;
    const Tensor& y = g.value(self);
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad(a.id());
    const std::size_t cols = y.cols();
    auto idx = [&](std::size_t line, std::size_t i) { return along_rows ? line * cols + i : i * cols + line; };
    for (std::size_t l = 0; l < lines; ++l) {
      double dot = 0;
      for (std::size_t i = 0; i < len; ++i) dot += go[idx(l, i)] * y[idx(l, i)];
      for (std::size_t i = 0; i < len; ++i) ga[idx(l, i)] += y[idx(l, i)] * (go[idx(l, i)] - dot);
    }
  });
}

inline Var sum(const Var& a) {
  Graph& g = a.graph();
  double s = 0;
  for (double v : a.value().values()) s += v;
  return g.make(Tensor::scalar(s), {a}, [a](Graph& g, std::size_t self) {
    if (g.requires_grad(a.id())) g.grad(a.id()).map().array() += g.grad(self)[0];
  });
}

inline Var mean(const Var& a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

// Concatenation of rank-2 tensors along `axis` (0: stack rows, 1: side by side).
inline Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Graph& g = parts.front().graph();
  const Tensor& first = parts.front().value();
  if (first.rank() != 2 || (axis != 0 && axis != 1)) throw ShapeError("concat: rank-2 tensors and axis 0 or 1 required");
  std::size_t total = 0;
  for (const Var& p : parts) {
    detail::same_graph(parts.front(), p);
    const Tensor& t = p.value();
    const bool ok = t.rank() == 2 && (axis == 0 ? t.cols() == first.cols() : t.rows() == first.rows());
    if (!ok) detail::shape_mismatch("concat", first.shape(), t.shape());
    total += axis == 0 ? t.rows() : t.cols();
  }
  Tensor out(axis == 0 ? Shape{total, first.cols()} : Shape{first.rows(), total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    if (axis == 0) {
      out.map().middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(t.rows())) = t.map();
      offset += t.rows();
    } else {
      out.map().middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(t.cols())) = t.map();
      offset += t.cols();
    }
  }
  return g.make(std::move(out), parts, [parts, axis](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const Tensor& t = p.value();
      const auto n = static_cast<Eigen::Index>(axis == 0 ? t.rows() : t.cols());
      if (g.requires_grad(p.id())) {
        if (axis == 0) g.grad(p.id()).map() += go.map().middleRows(static_cast<Eigen::Index>(offset), n);
        else g.grad(p.id()).map() += go.map().middleCols(static_cast<Eigen::Index>(offset), n);
      }
      offset += static_cast<std::size_t>(n);
    }
  });
}

// Rows (axis 0) or columns (axis 1) in [begin, end) of a rank-2 tensor.
inline Var slice(const Var& a, int axis, std::size_t begin, std::size_t end) {
  Graph& g = a.graph();
  const Tensor& x = a.value();
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if (x.rank() != 2 || (axis != 0 && axis != 1) || begin >= end || end > extent)
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " + std::to_string(axis) +
                     " of shape " + shape_string(x.shape()));
  const auto b = static_cast<Eigen::Index>(begin), n = static_cast<Eigen::Index>(end - begin);
  Tensor out(axis == 0 ? Shape{end - begin, x.cols()} : Shape{x.rows(), end - begin});
  out.map() = axis == 0 ? RowMatrix(x.map().middleRows(b, n)) : RowMatrix(x.map().middleCols(b, n));
  return g.make(std::move(out), {a}, [a, axis, b, n](Graph& g, std::size_t self) {
    if (!g.requires_grad(a.id())) return;
    if (axis == 0) g.grad(a.id()).map().middleRows(b, n) += g.grad(self).map();
    else g.grad(a.id()).map().middleCols(b, n) += g.grad(self).map();
  });
}

// Row-wise layer normalization with learned gain and bias of length n.
inline Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5) {
  Graph& g = detail::same_graph(a, gain);
  detail::same_graph(a, bias);
  const Tensor& x = a.value();
  if (x.rank() != 2 || gain.value().size() != x.cols() || bias.value().size() != x.cols())
    detail::shape_mismatch("layer_norm", x.shape(), gain.value().shape());
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor out(x.shape());
  std::vector<double> inv_std(rows);
  Tensor normalized(x.shape());
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0;
    for (std::size_t c = 0; c < cols; ++c) mu += x(r, c);
    mu /= static_cast<double>(cols);
    double var = 0;
    for (std::size_t c = 0; c < cols; ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      normalized(r, c) = (x(r, c) - mu) * inv_std[r];
      out(r, c) = normalized(r, c) * gv[c] + bv[c];
    }
  }
  return g.make(std::move(out), {a, gain, bias},
                [a, gain, bias, inv_std = std::move(inv_std), normalized = std::move(normalized)](Graph& g, std::size_t self) {
                  const Tensor& go = g.grad(self);
                  const std::size_t rows = normalized.rows(), cols = normalized.cols();
                  const Tensor& gv = gain.value();
                  if (g.requires_grad(gain.id())) {
                    Tensor& gg = g.grad(gain.id());
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < cols; ++c) gg[c] += go(r, c) * normalized(r, c);
                  }
                  if (g.requires_grad(bias.id())) {
                    Tensor& gb = g.grad(bias.id());
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t c = 0; c < cols; ++c) gb[c] += go(r, c);
                  }
                  if (g.requires_grad(a.id())) {
                    Tensor& ga = g.grad(a.id());
                    const double n = static_cast<double>(cols);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double s1 = 0, s2 = 0;
                      for (std::size_t c = 0; c < cols; ++c) {
                        const double d = go(r, c) * gv[c];
                        s1 += d;
                        s2 += d * normalized(r, c);
                      }
                      for (std::size_t c = 0; c < cols; ++c) {
                        const double d = go(r, c) * gv[c];
                        ga(r, c) += inv_std[r] / n * (n * d - s1 - normalized(r, c) * s2);
                      }
                    }
                  }
                });
}

// Multi-head attention restricted to a window of +-`window` positions.
//
// queries [S x heads*key_dim], keys [S x heads*key_dim], values [S x heads*value_dim].
// Position t attends to positions max(0, t-window) .. min(S-1, t+window) with
// weights softmax(q_t . k_l / sqrt(key_dim)); the output row t, head h, is the
// weighted sum of the value rows of head h. Heads are laid out side by side.
inline Var windowed_attention(const Var& queries, const Var& keys, const Var& values, std::size_t heads,
                              std::size_t window) {
  Graph& g = detail::same_graph(queries, keys);
  detail::same_graph(queries, values);
  const Tensor& q = queries.value();
  const Tensor& k = keys.value();
  const Tensor& v = values.value();
  if (q.rank() != 2 || k.shape() != q.shape()) detail::shape_mismatch("attention (queries/keys)", q.shape(), k.shape());
  if (v.rank() != 2 || v.rows() != q.rows()) detail::shape_mismatch("attention (queries/values)", q.shape(), v.shape());
  if (heads == 0 || q.cols() % heads != 0 || v.cols() % heads != 0)
    throw ShapeError("attention: widths " + std::to_string(q.cols()) + "/" + std::to_string(v.cols()) +
                     " not divisible by " + std::to_string(heads) + " heads");
  const std::size_t seq = q.rows(), kd = q.cols() / heads, vd = v.cols() / heads, span = 2 * window + 1;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(kd));
  std::vector<double> weights(heads * seq * span, 0.0);
  Tensor out({seq, heads * vd});
  std::vector<double> scores(span);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t t = 0; t < seq; ++t) {
      const std::size_t lo = t >= window ? t - window : 0, hi = std::min(seq - 1, t + window);
      const double* qt = q.data() + t * q.cols() + h * kd;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = lo; l <= hi; ++l) {
        const double* kl = k.data() + l * k.cols() + h * kd;
        double s = 0;
        for (std::size_t i = 0; i < kd; ++i) s += qt[i] * kl[i];
        scores[l - lo] = s * inv_scale;
        mx = std::max(mx, scores[l - lo]);
      }
      double total = 0;
      for (std::size_t l = lo; l <= hi; ++l) total += (scores[l - lo] = std::exp(scores[l - lo] - mx));
      double* w = weights.data() + (h * seq + t) * span;
      double* zt = out.data() + t * out.cols() + h * vd;
      for (std::size_t l = lo; l <= hi; ++l) {
        const double p = scores[l - lo] / total;
        w[l + window - t] = p;
        const double* vl = v.data() + l * v.cols() + h * vd;
        for (std::size_t i = 0; i < vd; ++i) zt[i] += p * vl[i];
      }
    }
  }
  return g.make(
      std::move(out), {queries, keys, values},
      [queries, keys, values, heads, window, weights = std::move(weights)](Graph& g, std::size_t self) {
        const Tensor& q = queries.value();
        const Tensor& k = keys.value();
        const Tensor& v = values.value();
        const Tensor& go = g.grad(self);
        const std::size_t seq = q.rows(), kd = q.cols() / heads, vd = v.cols() / heads, span = 2 * window + 1;
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(kd));
        const bool need_q = g.requires_grad(queries.id()), need_k = g.requires_grad(keys.id()),
                   need_v = g.requires_grad(values.id());
        double* gq = need_q ? g.grad(queries.id()).data() : nullptr;
        double* gk = need_k ? g.grad(keys.id()).data() : nullptr;
        double* gv = need_v ? g.grad(values.id()).data() : nullptr;
        std::vector<double> dscore(span);
        for (std::size_t h = 0; h < heads; ++h) {
          for (std::size_t t = 0; t < seq; ++t) {
            const std::size_t lo = t >= window ? t - window : 0, hi = std::min(seq - 1, t + window);
            const double* w = weights.data() + (h * seq + t) * span;
            const double* gz = go.data() + t * go.cols() + h * vd;
            double dot = 0;
            for (std::size_t l = lo; l <= hi; ++l) {
              const double p = w[l + window - t];
              const double* vl = v.data() + l * v.cols() + h * vd;
              double dp = 0;
              for (std::size_t i = 0; i < vd; ++i) dp += gz[i] * vl[i];
              dscore[l - lo] = dp;
              dot += p * dp;
              if (gv) {
                double* gvl = gv + l * v.cols() + h * vd;
                for (std::size_t i = 0; i < vd; ++i) gvl[i] += p * gz[i];
              }
            }
            if (!gq && !gk) continue;
            const double* qt = q.data() + t * q.cols() + h * kd;
            for (std::size_t l = lo; l <= hi; ++l) {
              const double ds = w[l + window - t] * (dscore[l - lo] - dot) * inv_scale;
              const double* kl = k.data() + l * k.cols() + h * kd;
              if (gq) {
                double* gqt = gq + t * q.cols() + h * kd;
                for (std::size_t i = 0; i < kd; ++i) gqt[i] += ds * kl[i];
              }
              if (gk) {
                double* gkl = gk + l * k.cols() + h * kd;
                for (std::size_t i = 0; i < kd; ++i) gkl[i] += ds * qt[i];
              }
            }
          }
        }
      });
}

}  // namespace bemopt::ad
