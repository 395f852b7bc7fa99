#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bemopt/ad/gradcheck.hpp"
#include "bemopt/model/attention.hpp"
#include "bemopt/model/metamodel.hpp"
#include "bemopt/train/metrics.hpp"

using namespace bemopt;
using namespace bemopt::model;

namespace {

MetamodelConfig tiny_config(std::size_t input_dim = 5) {
  MetamodelConfig c;
  c.d_emb = 8;
  c.key_dim = 4;
  c.value_dim = 4;
  c.heads = 2;
  c.layers = 1;
  c.window = 3;
  c.ffn_hidden = 16;
  c.input_dim = input_dim;
  return c;
}

ad::Tensor random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  ad::Tensor t({rows, cols});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

double max_row_change(const ad::Tensor& a, const ad::Tensor& b, std::size_t row) {
  double d = 0;
  for (std::size_t c = 0; c < a.cols(); ++c) d = std::max(d, std::abs(a(row, c) - b(row, c)));
  return d;
}

}  // namespace

TEST(Embed, AffineMapSharedAcrossSteps) {
  Metamodel m = Metamodel::create(tiny_config(2), 1);
  m.parameters().at("embed.w").value.fill(0.0);
  auto& b = m.parameters().at("embed.b").value;
  std::iota(b.values().begin(), b.values().end(), 1.0);
  ad::Graph g(false);
  const ad::Tensor zero_w = m.embed(g, g.constant(random_inputs(3, 2, 4))).value();
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(zero_w(r, c), static_cast<double>(c + 1));

  // Random 3x2 input against a direct matrix-vector product.
  Metamodel n = Metamodel::create(tiny_config(2), 2);
  const ad::Tensor x({3, 2}, {0.1, 0.9, 0.5, 0.5, 0.1, 0.9});
  ad::Graph h(false);
  const ad::Tensor u = n.embed(h, h.constant(x)).value();
  const auto& w = n.parameters().at("embed.w").value;
  const auto& bias = n.parameters().at("embed.b").value;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c)
      EXPECT_NEAR(u(r, c), w(0, c) * x(r, 0) + w(1, c) * x(r, 1) + bias[c], 1e-15);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(u(0, c), u(2, c));
  EXPECT_THROW(n.embed(h, h.constant(random_inputs(3, 3, 1))), ShapeError);
}

TEST(Attend, EqualKeysAverageTheValues) {
  const Matrix keys(3, 2, std::vector<double>{1, 2, 1, 2, 1, 2});
  const Matrix values(3, 1, std::vector<double>{1, 5, 9});
  const std::vector<double> q{0.3, -0.7};
  const auto r = attend(q, keys, values);
  for (double w : r.weights) EXPECT_NEAR(w, 1.0 / 3, 1e-15);
  EXPECT_NEAR(r.output[0], 5.0, 1e-14);
}

TEST(Attend, SaturatedScoreSelectsOnePosition) {
  // Key width 1: scores are q*k, a gap of 50 between the top two.
  const Matrix keys(3, 1, std::vector<double>{0, 50, -3});
  const Matrix values(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::vector<double> q{1};
  const auto r = attend(q, keys, values);
  EXPECT_NEAR(r.output[0], 3.0, 1e-10);
  EXPECT_NEAR(r.output[1], 4.0, 1e-10);
}

TEST(Attend, ThreeTermHandComputation) {
  // q = 2, keys (0.5, 1, -1), key width 1: scores 1, 2, -2.
  const Matrix keys(3, 1, std::vector<double>{0.5, 1, -1});
  const Matrix values(3, 1, std::vector<double>{10, 20, 30});
  const std::vector<double> q{2};
  const auto r = attend(q, keys, values);
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(-2.0), z = e1 + e2 + e3;
  EXPECT_NEAR(r.weights[0], e1 / z, 1e-15);
  EXPECT_NEAR(r.output[0], (10 * e1 + 20 * e2 + 30 * e3) / z, 1e-12);
  EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-12);
}

TEST(PositionalEncoding, DailyAndWeeklyHarmonics) {
  const ad::Tensor pe = positional_encoding(kHoursPerWeek, 32);
  EXPECT_EQ(pe, positional_encoding(kHoursPerWeek, 32));
  // The first pair has a 24-hour period.
  for (std::size_t t = 0; t + 24 < kHoursPerWeek; ++t) {
    EXPECT_NEAR(pe(t, 0), pe(t + 24, 0), 1e-12);
    EXPECT_NEAR(pe(t, 1), pe(t + 24, 1), 1e-12);
  }
  // Distinct hours of the week get distinct codes.
  for (std::size_t t = 1; t < kHoursPerWeek; ++t) {
    double d = 0;
    for (std::size_t c = 0; c < 32; ++c) d = std::max(d, std::abs(pe(t, c) - pe(0, c)));
    EXPECT_GT(d, 1e-3) << "hour " << t;
  }
}

TEST(Encoder, SingleLayerIsLocalToItsWindow) {
  MetamodelConfig cfg = tiny_config();
  cfg.window = 4;
  const Metamodel m = Metamodel::create(cfg, 3);
  const std::size_t seq = 40, k = 20;
  const ad::Tensor x = random_inputs(seq, cfg.d_emb, 5);
  ad::Graph g(false);
  const ad::Tensor base = m.encoder_layer(g, 0, g.constant(x)).value();
  for (std::size_t p = 0; p < seq; ++p) {
    ad::Tensor y = x;
    for (std::size_t c = 0; c < cfg.d_emb; ++c) y(p, c) += 0.5;
    const ad::Tensor out = m.encoder_layer(g, 0, g.constant(y)).value();
    const bool inside = p + cfg.window >= k && p <= k + cfg.window;
    if (inside) {
      EXPECT_GT(max_row_change(base, out, k), 1e-9) << "position " << p;
    } else {
      EXPECT_LE(max_row_change(base, out, k), 1e-12) << "position " << p;
    }
  }
}

TEST(Encoder, StackedReceptiveFieldIsLayersTimesWindow) {
  MetamodelConfig cfg = tiny_config();
  cfg.window = 3;
  cfg.layers = 3;
  const Metamodel m = Metamodel::create(cfg, 4);
  const std::size_t seq = 48, k = 24, reach = cfg.layers * cfg.window;
  const ad::Tensor x = random_inputs(seq, cfg.d_emb, 6);
  auto encode = [&](const ad::Tensor& in) {
    ad::Graph g(false);
    ad::Var h = g.constant(in);
    for (std::size_t l = 0; l < cfg.layers; ++l) h = m.encoder_layer(g, l, h);
    return h.value();
  };
  const ad::Tensor base = encode(x);
  for (std::size_t p = 0; p < seq; ++p) {
    ad::Tensor y = x;
    for (std::size_t c = 0; c < cfg.d_emb; ++c) y(p, c) -= 0.7;
    const double change = max_row_change(base, encode(y), k);
    if (p + reach < k || p > k + reach) {
      EXPECT_LE(change, 1e-12) << "position " << p;
    }
    if (p + reach == k || p == k + reach) {
      EXPECT_GT(change, 0.0) << "position " << p;
    }
  }
}

TEST(Metamodel, FullModelReceptiveField) {
  // Encoder N*window, then per decoder layer one self and one cross window.
  MetamodelConfig cfg = tiny_config();
  cfg.window = 2;
  cfg.layers = 2;
  const Metamodel m = Metamodel::create(cfg, 7);
  const std::size_t seq = 48, k = 24, reach = 3 * cfg.layers * cfg.window;
  const ad::Tensor x = random_inputs(seq, cfg.input_dim, 8);
  const ad::Tensor base = ad::Tensor::from_matrix(m.predict(x.to_matrix()));
  for (std::size_t p = 0; p < seq; ++p) {
    ad::Tensor y = x;
    y(p, 0) += 1.0;
    const ad::Tensor out = ad::Tensor::from_matrix(m.predict(y.to_matrix()));
    if (p + reach < k || p > k + reach) {
      EXPECT_LE(max_row_change(base, out, k), 1e-12) << "position " << p;
    }
  }
}

TEST(Metamodel, UntrainedOutputShapeAndFiniteness) {
  for (auto kind : {ModelKind::Transformer, ModelKind::Ffn}) {
    MetamodelConfig cfg;
    cfg.kind = kind;
    cfg.d_emb = 16;
    cfg.layers = 1;
    const Metamodel m = Metamodel::create(cfg, 9);
    const Matrix out = m.predict(random_inputs(kHoursPerWeek, kInputChannels, 10).to_matrix());
    EXPECT_EQ(out.rows(), kHoursPerWeek);
    EXPECT_EQ(out.cols(), kOutputChannels);
    for (double v : out.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Metamodel, SingleHeadAndGridShapes) {
  const MetamodelConfig chosen;
  std::vector<MetamodelConfig> grid;
  for (std::size_t d : {16, 32, 64, 128}) grid.push_back(chosen), grid.back().d_emb = d;
  for (std::size_t r : {4, 8, 16}) grid.push_back(chosen), grid.back().key_dim = r;
  for (std::size_t v : {4, 8, 16}) grid.push_back(chosen), grid.back().value_dim = v;
  for (std::size_t h : {1, 4, 8, 16}) grid.push_back(chosen), grid.back().heads = h;
  for (std::size_t w : {6, 12, 24}) grid.push_back(chosen), grid.back().window = w;
  for (const auto& cfg : grid) {
    MetamodelConfig one = cfg;
    one.layers = 1;
    const Metamodel m = Metamodel::create(one, 11);
    ad::Graph g(false);
    const ad::Tensor out = m.encoder_layer(g, 0, g.constant(random_inputs(kHoursPerWeek, one.d_emb, 12))).value();
    EXPECT_EQ(out.rows(), kHoursPerWeek);
    EXPECT_EQ(out.cols(), one.d_emb);
  }
}

TEST(FfnBaseline, PointwiseInTime) {
  MetamodelConfig cfg = tiny_config();
  cfg.kind = ModelKind::Ffn;
  const Metamodel m = Metamodel::create(cfg, 13);
  const ad::Tensor x = random_inputs(10, cfg.input_dim, 14);
  std::vector<std::size_t> perm{3, 7, 0, 9, 1, 5, 2, 8, 6, 4};
  ad::Tensor y({10, cfg.input_dim});
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < cfg.input_dim; ++c) y(r, c) = x(perm[r], c);
  const Matrix a = m.predict(x.to_matrix()), b = m.predict(y.to_matrix());
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < kOutputChannels; ++c) EXPECT_NEAR(b(r, c), a(perm[r], c), 1e-14);
}

TEST(Metamodel, FullLossGradientMatchesFiniteDifferences) {
  MetamodelConfig cfg = tiny_config(kInputChannels);
  cfg.window = 3;
  Metamodel m = Metamodel::create(cfg, 15);
  const ad::Tensor x = random_inputs(24, kInputChannels, 16);
  Rng rng(17);
  ad::Tensor target({24, kOutputChannels});
  for (double& v : target.values()) v = rng.normal();
  train::AggregateWeights agg{};
  for (std::size_t c : kHeatAggregateChannels) agg[c] = 0.5;
  const auto params = m.parameters().pointers();
  const auto res = ad::grad_check(
      [&](ad::Graph& g) {
        return train::episode_loss(g, m.forward(g, g.constant(x)), g.constant(target), agg, train::LossWeights{});
      },
      params);
  EXPECT_EQ(res.checked, m.parameters().scalar_count());
  EXPECT_LT(res.max_relative_error, 1e-4);
}

TEST(Metamodel, FrozenModelHasNoParameterGradients) {
  Metamodel m = Metamodel::create(tiny_config(), 18);
  m.set_frozen(true);
  ad::Graph g;
  const ad::Var y = ad::sum(m.forward(g, g.constant(random_inputs(12, 5, 19))));
  EXPECT_FALSE(g.requires_grad(y.id()));
}

TEST(MetamodelConfig, JsonRoundTripAndMismatch) {
  MetamodelConfig cfg = tiny_config();
  cfg.kind = ModelKind::Ffn;
  EXPECT_EQ(config_from_json(to_json(cfg)), cfg);
  EXPECT_THROW(parse_model_kind("lstm"), InputError);
  nlohmann::json bad = to_json(cfg);
  bad["window"] = 0;
  EXPECT_THROW(config_from_json(bad), InputError);

  const Metamodel a = Metamodel::create(tiny_config(), 20);
  MetamodelConfig other = tiny_config();
  other.d_emb = 16;
  EXPECT_THROW(Metamodel::from_parameters(other, a.parameters()), InputError);
  const Metamodel b = Metamodel::from_parameters(tiny_config(), a.parameters());
  const Matrix in = random_inputs(6, 5, 21).to_matrix();
  EXPECT_EQ(a.predict(in), b.predict(in));
}

TEST(Metamodel, SeededInitializationIsReproducible) {
  const Metamodel a = Metamodel::create(tiny_config(), 22), b = Metamodel::create(tiny_config(), 22),
                  c = Metamodel::create(tiny_config(), 23);
  EXPECT_EQ(a.parameters()[0].value, b.parameters()[0].value);
  EXPECT_NE(a.parameters()[0].value, c.parameters()[0].value);
}
