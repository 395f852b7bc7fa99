#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bemopt/sim/weather.hpp"
#include "bemopt/train/trainer.hpp"

using namespace bemopt;
using namespace bemopt::train;

namespace {

// Only the temperature channel and one aggregate channel carry values.
Matrix outputs(const std::vector<double>& t, const std::vector<double>& q) {
  Matrix m(t.size(), kOutputChannels);
  for (std::size_t h = 0; h < t.size(); ++h) {
    m(h, kTIntOffice) = t[h];
    m(h, kQHeatOffice) = q[h];
  }
  return m;
}

AggregateWeights unit_heat_only() {
  AggregateWeights w{};
  w[kQHeatOffice] = 1;
  return w;
}

struct SmallData {
  Dataset ds;
  NormStats stats;
  std::vector<TensorEpisode> train, validation;
};

SmallData small_data(std::size_t n_train, std::size_t n_validation, std::uint64_t seed) {
  SmallData d;
  SampleOptions so;
  so.splits = {n_train, n_validation, 0};
  so.seed = seed;
  d.ds = sample_dataset(default_schema(), sim::synthesize_pool(8, seed), so);
  const auto tr = d.ds.train_episodes();
  d.stats = fit_norm_stats(d.ds.schema, tr);
  d.train = prepare(tr, d.stats);
  const auto va = d.ds.validation_episodes();
  d.validation = prepare(va, d.stats);
  return d;
}

model::MetamodelConfig small_model(model::ModelKind kind = model::ModelKind::Transformer) {
  model::MetamodelConfig c;
  c.kind = kind;
  c.d_emb = 16;
  c.heads = 2;
  c.layers = 1;
  c.ffn_hidden = 32;
  return c;
}

}  // namespace

TEST(Loss, PerfectPredictionIsZero) {
  const Matrix y = outputs({20, 21, 22, 23}, {5, 6, 7, 8});
  EXPECT_EQ(episode_loss_value(y, y, unit_heat_only(), {}), 0.0);
}

TEST(Loss, TemperatureGapOfEMinusOneGivesOne) {
  const double gap = std::numbers::e - 1;
  const Matrix target = outputs({20, 21, 22, 23}, {5, 6, 7, 8});
  const Matrix pred = outputs({20 + gap, 21 - gap, 22 + gap, 23 - gap}, {5, 6, 7, 8});
  LossWeights w;
  w.aux = 0;
  EXPECT_NEAR(episode_loss_value(pred, target, unit_heat_only(), w), 1.0, 1e-14);
}

TEST(Loss, FourStepToyMatchesScalarFormula) {
  const Matrix target = outputs({0.3, -1.2, 0.8, 0.1}, {1.5, -0.4, 0.2, 0.9});
  Matrix pred = outputs({0.5, -1.0, 0.2, 0.4}, {1.0, -0.1, 0.6, 0.7});
  pred(2, kQAcOffice) = 0.25;  // only reaches the auxiliary term
  const double rmse_t = std::sqrt((0.04 + 0.04 + 0.36 + 0.09) / 4);
  const double rmse_q = std::sqrt((0.25 + 0.09 + 0.16 + 0.04) / 4);
  const double aux = (0.04 + 0.04 + 0.36 + 0.09 + 0.25 + 0.09 + 0.16 + 0.04 + 0.0625) / (4 * kOutputChannels);
  const double expected = std::log(1 + rmse_t) + 0.3 * std::log(1 + rmse_q) + 0.1 * aux;
  EXPECT_NEAR(episode_loss_value(pred, target, unit_heat_only(), {}), expected, 1e-14);
}

TEST(Loss, WeightsAreValidated) {
  LossWeights w;
  w.alpha = 0;
  w.beta = 0;
  EXPECT_THROW(w.validate(), InputError);
  w.beta = -1;
  EXPECT_THROW(w.validate(), InputError);
}

TEST(Metrics, R2Conventions) {
  const std::vector<double> y{1, 2, 3};
  EXPECT_DOUBLE_EQ(r2_score(y, std::vector<double>{1, 2, 2}), 0.5);
  EXPECT_EQ(r2_score(y, y), 1.0);
  EXPECT_NEAR(r2_score(y, std::vector<double>{2, 2, 2}), 0.0, 1e-15);
  const std::vector<double> flat{4, 4, 4};
  EXPECT_EQ(r2_score(flat, flat), 1.0);
  EXPECT_EQ(r2_score(flat, std::vector<double>{4, 4, 5}), 0.0);
  EXPECT_THROW(r2_score(y, std::vector<double>{1, 2}), ShapeError);
}

TEST(Metrics, OccupiedVariantsAndAbsentMask) {
  const Matrix truth = outputs({20, 21, 22, 23}, {5, 6, 7, 8});
  const Matrix pred = outputs({21, 21, 22, 21}, {5, 8, 7, 8});
  const auto m = metrics(pred, truth, {false, true, true, false}, unit_heat_only());
  EXPECT_DOUBLE_EQ(m.mse_t, 5.0 / 4);
  EXPECT_DOUBLE_EQ(m.mse_q, 1.0);
  ASSERT_TRUE(m.mse_t_occ && m.mse_q_occ);
  EXPECT_EQ(*m.mse_t_occ, 0.0);
  EXPECT_DOUBLE_EQ(*m.mse_q_occ, 2.0);
  const auto none = metrics(pred, truth, {false, false, false, false}, unit_heat_only());
  EXPECT_FALSE(none.mse_t_occ.has_value());
  const auto report = summarize(std::vector<EpisodeMetrics>{none});
  EXPECT_FALSE(report.mse_t_occ.has_value());
  EXPECT_TRUE(to_json(report)["mse_t_occ"].is_null());
}

TEST(Metrics, ScalingAndTranslation) {
  Rng rng(3);
  std::vector<double> t(30), q(30), pt(30), pq(30);
  for (std::size_t i = 0; i < 30; ++i) {
    t[i] = rng.normal(21, 1);
    q[i] = rng.uniform(0, 100);
    pt[i] = t[i] + rng.normal(0, 0.3);
    pq[i] = q[i] + rng.normal(0, 5);
  }
  const std::vector<bool> mask(30, true);
  const auto base = tq_metrics({pt, pq}, {t, q}, mask);
  auto scaled = [](std::vector<double> v, double a, double c) {
    for (double& x : v) x = a * x + c;
    return v;
  };
  const double lambda = 3.7;
  const auto s = tq_metrics({scaled(pt, lambda, 0), scaled(pq, lambda, 0)}, {scaled(t, lambda, 0), scaled(q, lambda, 0)}, mask);
  EXPECT_NEAR(std::sqrt(s.mse_t), lambda * std::sqrt(base.mse_t), 1e-9);
  EXPECT_NEAR(s.r2_t, base.r2_t, 1e-9);
  EXPECT_NEAR(s.r2_q, base.r2_q, 1e-9);
  const auto shifted = tq_metrics({scaled(pt, 1, 5), scaled(pq, 1, 5)}, {scaled(t, 1, 5), scaled(q, 1, 5)}, mask);
  EXPECT_NEAR(shifted.mse_t, base.mse_t, 1e-9);
  EXPECT_NEAR(shifted.mse_q, base.mse_q, 1e-9);
}

TEST(Metrics, SummaryIsPopulationMeanAndStd) {
  std::vector<EpisodeMetrics> per(2);
  per[0].r2_t = 0.8;
  per[1].r2_t = 1.0;
  const auto r = summarize(per);
  EXPECT_DOUBLE_EQ(r.r2_t.mean, 0.9);
  EXPECT_NEAR(r.r2_t.std, 0.1, 1e-15);
  EXPECT_EQ(r.episodes, 2u);
}

TEST(Dataset, SplitRatios) {
  EXPECT_EQ(SplitSizes::from_total(4000), (SplitSizes{3800, 100, 100}));
  EXPECT_EQ(SplitSizes::from_total(2200), (SplitSizes{2090, 55, 55}));
  EXPECT_EQ(SplitSizes::from_total(40000), (SplitSizes{38000, 1000, 1000}));
  EXPECT_EQ(SplitSizes::from_total(10).total(), 10u);
}

TEST(Dataset, SeededAndJobIndependent) {
  SampleOptions so;
  so.splits = {6, 2, 2};
  so.seed = 9;
  const auto pool = sim::synthesize_pool(4, 1);
  const Dataset a = sample_dataset(default_schema(), pool, so);
  so.jobs = 3;
  const Dataset b = sample_dataset(default_schema(), pool, so);
  EXPECT_EQ(a.records, b.records);
  so.seed = 10;
  EXPECT_NE(sample_dataset(default_schema(), pool, so).records, a.records);
  EXPECT_EQ(a.train_episodes().size(), 6u);
  EXPECT_EQ(a.validation_episodes().size(), 2u);
  EXPECT_EQ(a.test_episodes().size(), 2u);
  EXPECT_THROW(sample_dataset(default_schema(), {}, so), InputError);
}

TEST(Dataset, KFoldAssignmentPartitions) {
  const auto [train0, held0] = kfold_split(100, 5, 0);
  EXPECT_EQ(train0.size() + held0.size(), 100u);
  std::size_t held = 0;
  for (std::size_t f = 0; f < 5; ++f) held += kfold_split(100, 5, f).second.size();
  EXPECT_EQ(held, 100u);
  EXPECT_TRUE(kfold_split(10, 1, 0).second.empty());
  EXPECT_THROW(kfold_split(10, 3, 3), InputError);
}

TEST(Trainer, CosineScheduleEndpoints) {
  TrainConfig cfg;
  cfg.epochs = 11;
  cfg.adam.learning_rate = 2e-3;
  EXPECT_EQ(cfg.learning_rate(1), 2e-3);
  EXPECT_EQ(cfg.learning_rate(11), 2e-3);
  cfg.cosine_decay = true;
  cfg.final_lr_fraction = 0.1;
  EXPECT_NEAR(cfg.learning_rate(1), 2e-3, 1e-18);
  EXPECT_NEAR(cfg.learning_rate(6), 2e-3 * 0.55, 1e-15);
  EXPECT_NEAR(cfg.learning_rate(11), 2e-4, 1e-15);
}

TEST(Trainer, MemorizesTenEpisodes) {
  const SmallData d = small_data(10, 0, 21);
  model::Metamodel m = model::Metamodel::create(model::MetamodelConfig{}, 1);
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch = 1;
  cfg.adam.learning_rate = 1e-3;
  cfg.cosine_decay = true;
  const auto res = train::train(m, d.train, {}, d.stats, cfg);
  ASSERT_FALSE(res.diverged);
  EXPECT_LT(evaluate(m, d.train, d.stats, cfg.loss).loss.mean, 1e-2);
}

TEST(Trainer, BestEpochImprovesOnTheUntrainedModel) {
  const SmallData d = small_data(40, 10, 22);
  model::Metamodel m = model::Metamodel::create(small_model(), 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch = 8;
  const auto res = train::train(m, d.train, d.validation, d.stats, cfg);
  ASSERT_EQ(res.history.size(), 6u);
  EXPECT_TRUE(std::isnan(res.history[0].train_loss));
  EXPECT_LT(res.best_validation_loss, res.history[0].validation.loss.mean);
  EXPECT_EQ(res.history[res.best_epoch].validation.loss.mean, res.best_validation_loss);
  // The restored parameters are those of the best epoch.
  EXPECT_DOUBLE_EQ(evaluate(m, d.validation, d.stats, cfg.loss).loss.mean, res.best_validation_loss);
}

TEST(Trainer, DeterministicAcrossRunsAndJobCounts) {
  const SmallData d = small_data(24, 6, 23);
  auto run = [&](unsigned jobs) {
    model::Metamodel m = model::Metamodel::create(small_model(), 3);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch = 8;
    cfg.seed = 4;
    cfg.jobs = jobs;
    std::vector<double> curve;
    for (const auto& r : train::train(m, d.train, d.validation, d.stats, cfg).history) curve.push_back(r.validation.loss.mean);
    return std::make_pair(curve, m.parameters()[0].value);
  };
  const auto a = run(1), b = run(1), c = run(3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Trainer, LossIsInvariantToBatchOrder) {
  const SmallData d = small_data(6, 0, 24);
  const model::Metamodel m = model::Metamodel::create(small_model(model::ModelKind::Ffn), 5);
  std::vector<TensorEpisode> reversed(d.train.rbegin(), d.train.rend());
  const auto params = const_cast<model::Metamodel&>(m).parameters().pointers();
  double a = 0, b = 0;
  for (const auto& e : d.train) a += episode_gradient(m, e, d.stats.aggregate_weights(), {}, params).loss;
  for (const auto& e : reversed) b += episode_gradient(m, e, d.stats.aggregate_weights(), {}, params).loss;
  EXPECT_NEAR(a / 6, b / 6, 1e-14);
}

TEST(Trainer, RejectsBadConfiguration) {
  const SmallData d = small_data(2, 0, 25);
  model::Metamodel m = model::Metamodel::create(small_model(), 6);
  TrainConfig cfg;
  cfg.batch = 0;
  EXPECT_THROW(train::train(m, d.train, {}, d.stats, cfg), InputError);
  cfg = TrainConfig{};
  EXPECT_THROW(train::train(m, {}, {}, d.stats, cfg), InputError);
}

TEST(Trainer, DivergenceKeepsTheLastGoodParameters) {
  const SmallData d = small_data(8, 2, 26);
  model::Metamodel m = model::Metamodel::create(small_model(model::ModelKind::Ffn), 7);
  const auto initial = m.parameters()[0].value;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.adam.learning_rate = 1e200;
  const auto res = train::train(m, d.train, d.validation, d.stats, cfg);
  EXPECT_TRUE(res.diverged || res.best_epoch == 0 || res.skipped_steps > 0);
  for (double v : m.parameters()[0].value.values()) EXPECT_TRUE(std::isfinite(v));
  if (res.best_epoch == 0) {
    EXPECT_EQ(m.parameters()[0].value, initial);
  }
}
