#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "bemopt/ad/ops.hpp"
#include "bemopt/model/config.hpp"

namespace bemopt::model {

// Fixed sinusoidal position code [length x width]. The first frequencies are
// harmonics of the day and of the week so hour-of-day and day-of-week are
// recoverable; remaining pairs use geometric frequencies.
inline ad::Tensor positional_encoding(std::size_t length, std::size_t width) {
  std::vector<double> periods;
  for (int k = 1; k <= 4; ++k) periods.push_back(24.0 / k);
  for (int k = 1; k <= 6; ++k) periods.push_back(168.0 / k);
  const std::size_t pairs = (width + 1) / 2;
  for (std::size_t j = periods.size(); j < pairs; ++j)
    periods.push_back(2.0 * std::numbers::pi * std::pow(10000.0, 2.0 * static_cast<double>(j) / static_cast<double>(width)));
  ad::Tensor pe({length, width});
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t c = 0; c < width; ++c) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / periods[c / 2];
      pe(t, c) = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

// Transformer metamodel and per-hour FFN baseline sharing one parameter
// container. Inputs are normalized [S x input_dim]; outputs standardized
// [S x output_dim].
class Metamodel {
 public:
  Metamodel() = default;

  static Metamodel create(const MetamodelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Metamodel m;
    m.cfg_ = cfg;
    Rng rng = Rng::stream(seed, "metamodel-init");
    auto& ps = m.params_;
    const std::size_t d = cfg.d_emb, qk = cfg.heads * cfg.key_dim, hv = cfg.heads * cfg.value_dim;
    if (cfg.kind == ModelKind::Ffn) {
      ps.add_uniform("ffn.w1", {cfg.input_dim, d}, cfg.input_dim, rng);
      ps.add_uniform("ffn.b1", {d}, cfg.input_dim, rng);
      ps.add_uniform("ffn.w2", {d, d}, d, rng);
      ps.add_uniform("ffn.b2", {d}, d, rng);
      ps.add_uniform("ffn.w3", {d, cfg.output_dim}, d, rng);
      ps.add_uniform("ffn.b3", {cfg.output_dim}, d, rng);
      return m;
    }
    ps.add_uniform("embed.w", {cfg.input_dim, d}, cfg.input_dim, rng);
    ps.add_uniform("embed.b", {d}, cfg.input_dim, rng);
    auto attention_block = [&](const std::string& p) {
      ps.add_uniform(p + ".wq", {d, qk}, d, rng);
      ps.add_uniform(p + ".wk", {d, qk}, d, rng);
      ps.add_uniform(p + ".wv", {d, hv}, d, rng);
      ps.add_uniform(p + ".wo", {hv, d}, hv, rng);
      ps.add_uniform(p + ".bo", {d}, hv, rng);
      ps.add_constant(p + ".norm.gain", {d}, 1.0);
      ps.add_constant(p + ".norm.bias", {d}, 0.0);
    };
    auto ffn_block = [&](const std::string& p) {
      ps.add_uniform(p + ".w1", {d, cfg.ffn_hidden}, d, rng);
      ps.add_uniform(p + ".b1", {cfg.ffn_hidden}, d, rng);
      ps.add_uniform(p + ".w2", {cfg.ffn_hidden, d}, cfg.ffn_hidden, rng);
      ps.add_uniform(p + ".b2", {d}, cfg.ffn_hidden, rng);
      ps.add_constant(p + ".norm.gain", {d}, 1.0);
      ps.add_constant(p + ".norm.bias", {d}, 0.0);
    };
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string p = "encoder." + std::to_string(l);
      attention_block(p + ".self");
      ffn_block(p + ".ffn");
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::string p = "decoder." + std::to_string(l);
      attention_block(p + ".self");
      attention_block(p + ".cross");
      ffn_block(p + ".ffn");
    }
    ps.add_uniform("output.w", {d, cfg.output_dim}, d, rng);
    ps.add_uniform("output.b", {cfg.output_dim}, d, rng);
    return m;
  }

  static Metamodel from_parameters(const MetamodelConfig& cfg, ParameterSet params) {
    Metamodel m = create(cfg, 0);
    if (params.size() != m.params_.size()) throw InputError("checkpoint parameter count does not match the config");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].name != m.params_[i].name || params[i].value.shape() != m.params_[i].value.shape())
        throw InputError("checkpoint tensor '" + params[i].name + "' does not match the config (expected '" +
                         m.params_[i].name + "' " + ad::shape_string(m.params_[i].value.shape()) + ")");
    }
    m.params_ = std::move(params);
    return m;
  }

  const MetamodelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  void set_frozen(bool frozen) {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].requires_grad = !frozen;
  }

  ad::Var embed(ad::Graph& g, const ad::Var& inputs) const {
    check_inputs(inputs.value());
    return ad::add_bias(ad::matmul(inputs, p(g, "embed.w")), p(g, "embed.b"));
  }

  // Windowed multi-head attention, output projection, residual and norm.
  ad::Var attention_block(ad::Graph& g, const std::string& prefix, const ad::Var& x, const ad::Var& memory) const {
    const ad::Var q = ad::matmul(x, p(g, prefix + ".wq"));
    const ad::Var k = ad::matmul(memory, p(g, prefix + ".wk"));
    const ad::Var v = ad::matmul(memory, p(g, prefix + ".wv"));
    const ad::Var z = ad::windowed_attention(q, k, v, cfg_.heads, cfg_.window);
    const ad::Var a = ad::add_bias(ad::matmul(z, p(g, prefix + ".wo")), p(g, prefix + ".bo"));
    return ad::layer_norm(ad::add(x, a), p(g, prefix + ".norm.gain"), p(g, prefix + ".norm.bias"));
  }

  // Position-wise W2 max(0, W1 z + b1) + b2 with residual and norm.
  ad::Var ffn_block(ad::Graph& g, const std::string& prefix, const ad::Var& x) const {
    const ad::Var h = ad::relu(ad::add_bias(ad::matmul(x, p(g, prefix + ".w1")), p(g, prefix + ".b1")));
    const ad::Var f = ad::add_bias(ad::matmul(h, p(g, prefix + ".w2")), p(g, prefix + ".b2"));
    return ad::layer_norm(ad::add(x, f), p(g, prefix + ".norm.gain"), p(g, prefix + ".norm.bias"));
  }

  ad::Var encoder_layer(ad::Graph& g, std::size_t layer, const ad::Var& x) const {
    const std::string prefix = "encoder." + std::to_string(layer);
    return ffn_block(g, prefix + ".ffn", attention_block(g, prefix + ".self", x, x));
  }

  ad::Var decoder_layer(ad::Graph& g, std::size_t layer, const ad::Var& x, const ad::Var& latent) const {
    const std::string prefix = "decoder." + std::to_string(layer);
    const ad::Var self = attention_block(g, prefix + ".self", x, x);
    const ad::Var cross = attention_block(g, prefix + ".cross", self, latent);
    return ffn_block(g, prefix + ".ffn", cross);
  }

  // Embedded inputs plus the position code.
  ad::Var embed_with_position(ad::Graph& g, const ad::Var& inputs) const {
    const ad::Var u = embed(g, inputs);
    return ad::add(u, g.constant(positional_encoding(inputs.value().rows(), cfg_.d_emb)));
  }

  ad::Var forward(ad::Graph& g, const ad::Var& inputs) const {
    if (cfg_.kind == ModelKind::Ffn) return ffn_baseline_forward(g, inputs);
    const ad::Var u = embed_with_position(g, inputs);
    ad::Var latent = u;
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      latent = encoder_layer(g, l, latent);
      check_finite(latent, "encoder", l);
    }
    ad::Var x = u;
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      x = decoder_layer(g, l, x, latent);
      check_finite(x, "decoder", l);
    }
    return ad::add_bias(ad::matmul(x, p(g, "output.w")), p(g, "output.b"));
  }

  ad::Var ffn_baseline_forward(ad::Graph& g, const ad::Var& inputs) const {
    check_inputs(inputs.value());
    const ad::Var h1 = ad::relu(ad::add_bias(ad::matmul(inputs, p(g, "ffn.w1")), p(g, "ffn.b1")));
    const ad::Var h2 = ad::relu(ad::add_bias(ad::matmul(h1, p(g, "ffn.w2")), p(g, "ffn.b2")));
    return ad::add_bias(ad::matmul(h2, p(g, "ffn.w3")), p(g, "ffn.b3"));
  }

  // Inference without recording a tape.
  Matrix predict(const Matrix& normalized_inputs) const {
    ad::Graph g(false);
    const ad::Var out = forward(g, g.constant(ad::Tensor::from_matrix(normalized_inputs)));
    if (!out.value().all_finite()) throw NumericalError("metamodel output is not finite");
    return out.value().to_matrix();
  }

 private:
  ad::Var p(ad::Graph& g, const std::string& name) const { return g.parameter(params_.at(name)); }

  void check_inputs(const ad::Tensor& x) const {
    if (x.rank() != 2 || x.cols() != cfg_.input_dim)
      throw ShapeError("metamodel input " + ad::shape_string(x.shape()) + " does not have width " +
                       std::to_string(cfg_.input_dim));
  }

  static void check_finite(const ad::Var& v, const char* stack, std::size_t layer) {
    if (!v.value().all_finite())
      throw NumericalError(std::string("non-finite activation after ") + stack + " layer " + std::to_string(layer));
  }

  MetamodelConfig cfg_;
  ParameterSet params_;
};

}  // namespace bemopt::model
