#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include <json.hpp>

#include "bemopt/ad/tensor.hpp"
#include "bemopt/core/episode.hpp"
#include "bemopt/core/rng.hpp"

namespace bemopt::model {

enum class ModelKind { Transformer, Ffn };

inline std::string to_string(ModelKind k) { return k == ModelKind::Transformer ? "transformer" : "ffn"; }
inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "transformer") return ModelKind::Transformer;
  if (s == "ffn") return ModelKind::Ffn;
  throw InputError("unknown model kind '" + s + "' (expected transformer or ffn)");
}

// Architecture hyper-parameters. Defaults are the grid-search choices.
struct MetamodelConfig {
  ModelKind kind = ModelKind::Transformer;
  std::size_t d_emb = 64;
  std::size_t key_dim = 8;    // per-head query/key width
  std::size_t value_dim = 8;  // per-head value width
  std::size_t heads = 8;
  std::size_t layers = 4;
  std::size_t window = 12;    // attention half-window, hours
  std::size_t ffn_hidden = 128;
  std::size_t input_dim = kInputChannels;
  std::size_t output_dim = kOutputChannels;

  void validate() const {
    if (d_emb == 0 || key_dim == 0 || value_dim == 0 || heads == 0 || layers == 0 || ffn_hidden == 0 ||
        input_dim == 0 || output_dim == 0)
      throw InputError("metamodel config: all sizes must be positive");
    if (window < 1) throw InputError("metamodel config: attention window must be >= 1");
  }

  bool operator==(const MetamodelConfig&) const = default;
};

inline nlohmann::json to_json(const MetamodelConfig& c) {
  return {{"kind", to_string(c.kind)}, {"d_emb", c.d_emb},       {"key_dim", c.key_dim},
          {"value_dim", c.value_dim}, {"heads", c.heads},       {"layers", c.layers},
          {"window", c.window},       {"ffn_hidden", c.ffn_hidden}, {"input_dim", c.input_dim},
          {"output_dim", c.output_dim}};
}

inline MetamodelConfig config_from_json(const nlohmann::json& j) {
  MetamodelConfig c;
  if (j.contains("kind")) c.kind = parse_model_kind(j.at("kind").get<std::string>());
  auto get = [&](const char* key, std::size_t& field) {
    if (j.contains(key)) field = j.at(key).get<std::size_t>();
  };
  get("d_emb", c.d_emb);
  get("key_dim", c.key_dim);
  get("value_dim", c.value_dim);
  get("heads", c.heads);
  get("layers", c.layers);
  get("window", c.window);
  get("ffn_hidden", c.ffn_hidden);
  get("input_dim", c.input_dim);
  get("output_dim", c.output_dim);
  c.validate();
  return c;
}

// Ordered, address-stable collection of named parameters.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other) : params_(other.params_) {}
  ParameterSet& operator=(const ParameterSet& other) {
    params_ = other.params_;
    return *this;
  }

  // Weight initialized uniformly on +-1/sqrt(fan_in).
  ad::Parameter& add_uniform(const std::string& name, ad::Shape shape, std::size_t fan_in, Rng& rng) {
    ad::Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
    params_.push_back({name, std::move(t), true});
    return params_.back();
  }
  ad::Parameter& add_constant(const std::string& name, ad::Shape shape, double value) {
    params_.push_back({name, ad::Tensor(std::move(shape), value), true});
    return params_.back();
  }

  const ad::Parameter& operator[](std::size_t i) const { return params_[i]; }
  ad::Parameter& operator[](std::size_t i) { return params_[i]; }
  std::size_t size() const { return params_.size(); }

  const ad::Parameter& at(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p;
    throw InputError("no parameter named '" + name + "'");
  }
  ad::Parameter& at(const std::string& name) { return const_cast<ad::Parameter&>(std::as_const(*this).at(name)); }

  std::vector<ad::Parameter*> pointers() {
    std::vector<ad::Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::deque<ad::Parameter> params_;
};

}  // namespace bemopt::model
