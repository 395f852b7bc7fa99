#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include "bemopt/ad/adam.hpp"
#include "bemopt/model/metamodel.hpp"
#include "bemopt/train/dataset.hpp"
#include "bemopt/train/metrics.hpp"

namespace bemopt::train {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch = 16;
  ad::AdamConfig adam;
  LossWeights loss;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  // Cosine decay of the learning rate from its initial value down to
  // `final_lr_fraction` of it over the epochs; off keeps it constant.
  bool cosine_decay = false;
  double final_lr_fraction = 0.0;

  double learning_rate(std::size_t epoch) const {
    if (!cosine_decay || epochs <= 1) return adam.learning_rate;
    const double progress = static_cast<double>(epoch - 1) / static_cast<double>(epochs - 1);
    const double f = final_lr_fraction + (1.0 - final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    return adam.learning_rate * f;
  }

  void validate() const {
    if (batch == 0) throw InputError("batch size must be positive");
    if (!(adam.learning_rate > 0)) throw InputError("learning rate must be positive");
    if (final_lr_fraction < 0 || final_lr_fraction > 1) throw InputError("final learning-rate fraction outside [0, 1]");
    loss.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;        // 0 is the untrained model
  double train_loss = 0;        // mean over the epoch's episodes (NaN for epoch 0)
  MetricReport validation;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0;
  bool diverged = false;
  std::size_t skipped_steps = 0;
};

// Loss and gradients of one episode on its own graph.
struct EpisodeGrad {
  double loss = 0;
  std::vector<ad::Tensor> grads;
};

inline EpisodeGrad episode_gradient(const model::Metamodel& m, const TensorEpisode& e, const AggregateWeights& agg,
                                    const LossWeights& w, std::span<ad::Parameter* const> params) {
  ad::Graph g;
  const ad::Var pred = m.forward(g, g.constant(e.inputs));
  const ad::Var loss = episode_loss(g, pred, g.constant(e.targets), agg, w);
  EpisodeGrad out;
  out.loss = loss.value().item();
  if (std::isfinite(out.loss)) g.backward(loss);
  out.grads.reserve(params.size());
  for (const ad::Parameter* p : params) out.grads.push_back(g.parameter_grad(*p));
  return out;
}

// Runs f(i) for i in [0, n) over `jobs` threads with a static stride.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& f) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> threads;
    for (unsigned j = 0; j < jobs; ++j)
      threads.emplace_back([&, j] {
        try {
          for (std::size_t i = j; i < n; i += jobs) f(i);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Per-episode metrics with the loss on standardized targets and the MSE/R2
// values in physical units.
inline std::vector<EpisodeMetrics> evaluate_episodes(const model::Metamodel& m, std::span<const TensorEpisode> episodes,
                                                     const NormStats& stats, const LossWeights& w, unsigned jobs = 1) {
  std::vector<EpisodeMetrics> out(episodes.size());
  const auto agg = stats.aggregate_weights();
  parallel_for(episodes.size(), jobs, [&](std::size_t i) {
    const auto& e = episodes[i];
    const Matrix pred = m.predict(e.inputs.to_matrix());
    const Matrix target = e.targets.to_matrix();
    out[i] = metrics(denormalize_targets(stats, pred), denormalize_targets(stats, target), e.occupied_mask,
                     physical_aggregate_weights());
    out[i].loss = episode_loss_value(pred, target, agg, w);
  });
  return out;
}

inline MetricReport evaluate(const model::Metamodel& m, std::span<const TensorEpisode> episodes, const NormStats& stats,
                             const LossWeights& w, unsigned jobs = 1) {
  return summarize(evaluate_episodes(m, episodes, stats, w, jobs));
}

// Minibatch Adam. Keeps the parameters of the epoch with the lowest mean
// validation loss (epoch 0 included) and restores them at the end, or as soon
// as the training loss stops being finite.
inline TrainResult train(model::Metamodel& m, std::span<const TensorEpisode> training,
                         std::span<const TensorEpisode> validation, const NormStats& stats, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (training.empty()) throw InputError("training set is empty");
  const auto agg = stats.aggregate_weights();
  const auto params = m.parameters().pointers();
  ad::AdamState adam = ad::AdamState::for_parameters(params);
  Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle");

  // Without a validation split the training loss drives selection.
  const bool has_validation = !validation.empty();
  auto selection_loss = [&](const EpochRecord& r) { return has_validation ? r.validation.loss.mean : r.train_loss; };

  TrainResult result;
  EpochRecord initial;
  initial.train_loss = std::nan("");
  if (has_validation) initial.validation = evaluate(m, validation, stats, cfg.loss, cfg.jobs);
  else initial.train_loss = evaluate(m, training, stats, cfg.loss, cfg.jobs).loss.mean;
  result.history.push_back(initial);
  if (on_epoch) on_epoch(initial);
  result.best_validation_loss = selection_loss(initial);
  model::ParameterSet best = m.parameters();

  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpisodeGrad> per_episode;
  for (std::size_t epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    ad::AdamConfig adam_cfg = cfg.adam;
    adam_cfg.learning_rate = cfg.learning_rate(epoch);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - start);
      per_episode.assign(n, {});
      try {
        parallel_for(n, cfg.jobs, [&](std::size_t i) {
          per_episode[i] = episode_gradient(m, training[order[start + i]], agg, cfg.loss, params);
        });
      } catch (const NumericalError&) {
        result.diverged = true;
        break;
      }
      // Summed in batch order so the result does not depend on the job count.
      std::vector<ad::Tensor> grads = std::move(per_episode[0].grads);
      double batch_loss = per_episode[0].loss;
      for (std::size_t i = 1; i < n; ++i) {
        batch_loss += per_episode[i].loss;
        for (std::size_t k = 0; k < grads.size(); ++k)
          for (std::size_t j = 0; j < grads[k].size(); ++j) grads[k][j] += per_episode[i].grads[k][j];
      }
      if (!std::isfinite(batch_loss)) {
        result.diverged = true;
        break;
      }
      loss_sum += batch_loss;
      for (auto& gk : grads)
        for (double& v : gk.values()) v /= static_cast<double>(n);
      if (!ad::adam_step(params, grads, adam, adam_cfg)) ++result.skipped_steps;
    }
    if (result.diverged) break;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(training.size());
    if (has_validation) {
      try {
        rec.validation = evaluate(m, validation, stats, cfg.loss, cfg.jobs);
      } catch (const NumericalError&) {
        result.diverged = true;
        break;
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    const double sel = selection_loss(rec);
    if (!std::isfinite(sel)) {
      result.diverged = true;
      break;
    }
    if (sel < result.best_validation_loss) {
      result.best_validation_loss = sel;
      result.best_epoch = epoch;
      best = m.parameters();
    }
  }
  // Copy values back in place so parameter addresses stay valid.
  for (std::size_t i = 0; i < best.size(); ++i) m.parameters()[i].value = best[i].value;
  return result;
}

}  // namespace bemopt::train
