#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "bemopt/ad/tensor.hpp"
#include "bemopt/core/episode.hpp"
#include "bemopt/core/rng.hpp"
#include "bemopt/sim/rc_model.hpp"

namespace bemopt::train {

struct SplitSizes {
  std::size_t train = 0, validation = 0, test = 0;

  std::size_t total() const { return train + validation + test; }

  // 95 / 2.5 / 2.5 percent split of n examples.
  static SplitSizes from_total(std::size_t n) {
    SplitSizes s;
    s.validation = static_cast<std::size_t>(std::floor(0.025 * static_cast<double>(n) + 0.5));
    s.test = s.validation;
    if (2 * s.validation > n) s.validation = s.test = 0;
    s.train = n - s.validation - s.test;
    return s;
  }
  bool operator==(const SplitSizes&) const = default;
};

struct DatasetRecord {
  Scenario scenario;
  std::size_t weather_index = 0;
  SimOutput output;
  bool operator==(const DatasetRecord&) const = default;
};

// Sampled examples, ordered train, then validation, then test.
struct Dataset {
  Schema schema;
  std::vector<WeatherSeries> weather_pool;
  std::vector<DatasetRecord> records;
  SplitSizes splits;
  std::uint64_t seed = 0;

  Episode episode(std::size_t i) const {
    const auto& r = records.at(i);
    return assemble_episode(r.scenario, weather_pool.at(r.weather_index), &r.output);
  }
  std::vector<Episode> episodes(std::size_t begin, std::size_t end) const {
    std::vector<Episode> out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) out.push_back(episode(i));
    return out;
  }
  std::vector<Episode> train_episodes() const { return episodes(0, splits.train); }
  std::vector<Episode> validation_episodes() const {
    return episodes(splits.train, splits.train + splits.validation);
  }
  std::vector<Episode> test_episodes() const { return episodes(splits.train + splits.validation, splits.total()); }
};

// Checks that the schema declares every input variable the simulator needs.
inline void check_schema(const Schema& schema) {
  for (auto n : BuildingParams::names()) schema.at(n);
  for (auto n : BmsSchedule::names()) schema.at(n);
  for (auto n : OccupancySchedule::names()) schema.at(n);
  for (const auto& v : schema.variables())
    if (auto why = v.violation(); !why.empty()) throw InputError("schema variable '" + v.name + "': " + why);
}

inline double draw(const VariableSpec& spec, Rng& rng) { return spec.atom(rng.below(spec.atoms())); }

// Every variable drawn uniformly from its grid; BMS variables independently per day.
inline Scenario sample_scenario(const Schema& schema, Rng& rng) {
  Scenario s;
  for (std::size_t i = 0; i < BuildingParams::kCount; ++i) s.building[i] = draw(schema.at(BuildingParams::names()[i]), rng);
  for (std::size_t i = 0; i < BmsSchedule::kCount; ++i) {
    const auto& spec = schema.at(BmsSchedule::names()[i]);
    for (std::size_t d = 0; d < kDaysPerWeek; ++d) s.bms[i][d] = draw(spec, rng);
  }
  for (std::size_t i = 0; i < OccupancySchedule::kCount; ++i)
    s.occupancy[i] = draw(schema.at(OccupancySchedule::names()[i]), rng);
  s.occupancy.max_occupants = s.building.nb_occupants;
  return s;
}

struct SampleOptions {
  SplitSizes splits = SplitSizes::from_total(2200);
  std::uint64_t seed = 0;
  sim::RcModelConfig rc;
  unsigned jobs = 1;
};

inline Dataset sample_dataset(const Schema& schema, std::vector<WeatherSeries> pool, const SampleOptions& opt) {
  check_schema(schema);
  if (pool.empty()) throw InputError("weather pool is empty");
  opt.rc.validate();
  Dataset ds;
  ds.schema = schema;
  ds.weather_pool = std::move(pool);
  ds.splits = opt.splits;
  ds.seed = opt.seed;
  ds.records.resize(opt.splits.total());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < ds.records.size(); i += stride) {
      Rng rng = Rng::stream(opt.seed, "example", i);
      DatasetRecord& r = ds.records[i];
      r.scenario = sample_scenario(schema, rng);
      r.weather_index = rng.below(ds.weather_pool.size());
      r.output = sim::simulate_settled_week(r.scenario, ds.weather_pool[r.weather_index], opt.rc);
    }
  };
  const unsigned jobs = std::max(1u, opt.jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> threads;
    for (unsigned j = 0; j < jobs; ++j) threads.emplace_back(work, j, jobs);
  }
  return ds;
}

// Deterministic fold of example `index` among k folds.
inline std::size_t fold_of(std::size_t index, std::size_t k) {
  if (k == 0) throw InputError("fold count must be positive");
  return static_cast<std::size_t>(splitmix64(index) % k);
}

// Indices of [0, n) assigned to (training, held-out) for the given fold.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                                                 std::size_t fold) {
  if (fold >= k) throw InputError("fold index out of range");
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) (k > 1 && fold_of(i, k) == fold ? out.second : out.first).push_back(i);
  return out;
}

// Normalized episode held as tensors for training.
struct TensorEpisode {
  ad::Tensor inputs;
  ad::Tensor targets;
  std::vector<bool> occupied_mask;
};

inline std::vector<TensorEpisode> prepare(std::span<const Episode> episodes, const NormStats& stats) {
  std::vector<TensorEpisode> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) {
    const Episode n = normalize(e, stats);
    out.push_back({ad::Tensor::from_matrix(n.inputs), ad::Tensor::from_matrix(n.targets), n.occupied_mask});
  }
  return out;
}

}  // namespace bemopt::train
