#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "bemopt/ad/ops.hpp"
#include "bemopt/core/matrix.hpp"
#include "bemopt/core/types.hpp"

namespace bemopt::train {

struct LossWeights {
  double alpha = 1.0;  // temperature term
  double beta = 0.3;   // consumption term
  double aux = 0.1;    // mean squared error over all output channels

  void validate() const {
    if (alpha < 0 || beta < 0 || aux < 0) throw InputError("loss weights must be non-negative");
    if (alpha == 0 && beta == 0) throw InputError("loss weights alpha and beta cannot both be zero");
  }
};

// Row weights that turn an output row into the consumption aggregate.
using AggregateWeights = std::array<double, kOutputChannels>;

// Unit weights on the metered channels, for outputs in physical units.
inline AggregateWeights physical_aggregate_weights() {
  AggregateWeights w{};
  for (auto c : kHeatAggregateChannels) w[c] = 1.0;
  return w;
}

// alpha log(1 + RMSE_T) + beta log(1 + RMSE_Q) + aux * MSE(all channels) on one episode.
inline ad::Var episode_loss(ad::Graph& g, const ad::Var& prediction, const ad::Var& target,
                            const AggregateWeights& aggregate, const LossWeights& w) {
  const ad::Var diff = ad::sub(prediction, target);
  const ad::Var dt = ad::slice(diff, 1, kTIntOffice, kTIntOffice + 1);
  const ad::Var dq = ad::matmul(diff, g.constant(ad::Tensor({kOutputChannels, 1}, {aggregate.begin(), aggregate.end()})));
  const ad::Var rmse_t = ad::sqrt(ad::mean(ad::square(dt)));
  const ad::Var rmse_q = ad::sqrt(ad::mean(ad::square(dq)));
  ad::Var loss = ad::add(ad::scale(ad::log1p(rmse_t), w.alpha), ad::scale(ad::log1p(rmse_q), w.beta));
  if (w.aux > 0) loss = ad::add(loss, ad::scale(ad::mean(ad::square(diff)), w.aux));
  return loss;
}

inline double episode_loss_value(const Matrix& prediction, const Matrix& target, const AggregateWeights& aggregate,
                                 const LossWeights& w) {
  ad::Graph g(false);
  return episode_loss(g, g.constant(ad::Tensor::from_matrix(prediction)), g.constant(ad::Tensor::from_matrix(target)),
                      aggregate, w)
      .value()
      .item();
}

// Coefficient of determination 1 - SS_res / SS_tot. A constant target scores
// 1 when predicted exactly and 0 otherwise.
inline double r2_score(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw ShapeError("r2_score: length mismatch or empty input");
  double mean = 0;
  for (double v : truth) mean += v;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

inline double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Temperature and consumption-aggregate series of an output matrix.
struct TqSeries {
  std::vector<double> t, q;
};

inline TqSeries tq_series(const Matrix& m, const AggregateWeights& aggregate) {
  TqSeries s;
  s.t.resize(m.rows());
  s.q.resize(m.rows());
  for (std::size_t h = 0; h < m.rows(); ++h) {
    s.t[h] = m(h, kTIntOffice);
    double q = 0;
    for (std::size_t c = 0; c < kOutputChannels; ++c) q += aggregate[c] * m(h, c);
    s.q[h] = q;
  }
  return s;
}

struct EpisodeMetrics {
  double loss = 0;
  double mse_t = 0, mse_q = 0;
  std::optional<double> mse_t_occ, mse_q_occ;  // absent when nothing is occupied
  double r2_t = 0, r2_q = 0;
};

inline EpisodeMetrics tq_metrics(const TqSeries& pred, const TqSeries& truth, const std::vector<bool>& mask) {
  if (mask.size() != truth.t.size()) throw ShapeError("occupied mask length does not match the series");
  EpisodeMetrics m;
  m.mse_t = mse(pred.t, truth.t);
  m.mse_q = mse(pred.q, truth.q);
  m.r2_t = r2_score(truth.t, pred.t);
  m.r2_q = r2_score(truth.q, pred.q);
  double st = 0, sq = 0;
  std::size_t n = 0;
  for (std::size_t h = 0; h < mask.size(); ++h) {
    if (!mask[h]) continue;
    st += (pred.t[h] - truth.t[h]) * (pred.t[h] - truth.t[h]);
    sq += (pred.q[h] - truth.q[h]) * (pred.q[h] - truth.q[h]);
    ++n;
  }
  if (n > 0) {
    m.mse_t_occ = st / static_cast<double>(n);
    m.mse_q_occ = sq / static_cast<double>(n);
  }
  return m;
}

// Metrics of one episode. `aggregate` maps an output row onto the consumption
// aggregate (physical_aggregate_weights() for physical units,
// NormStats::aggregate_weights() for standardized outputs).
inline EpisodeMetrics metrics(const Matrix& prediction, const Matrix& target, const std::vector<bool>& mask,
                              const AggregateWeights& aggregate) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw ShapeError("metrics: prediction and target shapes differ");
  return tq_metrics(tq_series(prediction, aggregate), tq_series(target, aggregate), mask);
}

struct Stat {
  double mean = 0, std = 0;
};

inline Stat mean_std(std::span<const double> v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(v.size()));
  return s;
}

// Mean and standard deviation of each metric across episodes.
struct MetricReport {
  std::size_t episodes = 0;
  Stat loss, mse_t, mse_q;
  std::optional<Stat> mse_t_occ, mse_q_occ;
  Stat r2_t, r2_q;
};

inline MetricReport summarize(std::span<const EpisodeMetrics> per_episode) {
  MetricReport r;
  r.episodes = per_episode.size();
  auto collect = [&](auto field) {
    std::vector<double> v;
    for (const auto& m : per_episode) v.push_back(field(m));
    return mean_std(v);
  };
  r.loss = collect([](const EpisodeMetrics& m) { return m.loss; });
  r.mse_t = collect([](const EpisodeMetrics& m) { return m.mse_t; });
  r.mse_q = collect([](const EpisodeMetrics& m) { return m.mse_q; });
  r.r2_t = collect([](const EpisodeMetrics& m) { return m.r2_t; });
  r.r2_q = collect([](const EpisodeMetrics& m) { return m.r2_q; });
  std::vector<double> t_occ, q_occ;
  for (const auto& m : per_episode) {
    if (m.mse_t_occ) t_occ.push_back(*m.mse_t_occ);
    if (m.mse_q_occ) q_occ.push_back(*m.mse_q_occ);
  }
  if (!t_occ.empty()) r.mse_t_occ = mean_std(t_occ);
  if (!q_occ.empty()) r.mse_q_occ = mean_std(q_occ);
  return r;
}

inline nlohmann::json to_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j = {{"episodes", r.episodes}, {"loss", to_json(r.loss)}, {"mse_t", to_json(r.mse_t)},
                      {"mse_q", to_json(r.mse_q)}, {"r2_t", to_json(r.r2_t)}, {"r2_q", to_json(r.r2_q)}};
  j["mse_t_occ"] = r.mse_t_occ ? to_json(*r.mse_t_occ) : nlohmann::json(nullptr);
  j["mse_q_occ"] = r.mse_q_occ ? to_json(*r.mse_q_occ) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const EpisodeMetrics& m) {
  return {{"mse_t", m.mse_t},
          {"mse_q", m.mse_q},
          {"mse_t_occ", m.mse_t_occ ? nlohmann::json(*m.mse_t_occ) : nlohmann::json(nullptr)},
          {"mse_q_occ", m.mse_q_occ ? nlohmann::json(*m.mse_q_occ) : nlohmann::json(nullptr)},
          {"r2_t", m.r2_t},
          {"r2_q", m.r2_q}};
}

}  // namespace bemopt::train
