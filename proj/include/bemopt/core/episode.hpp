#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bemopt/core/matrix.hpp"
#include "bemopt/core/schema.hpp"
#include "bemopt/core/types.hpp"

namespace bemopt {

// Input layout per hour: building parameters (broadcast), BMS settings of the
// current day, occupancy fraction, weather.
inline constexpr std::size_t kBuildingOffset = 0;
inline constexpr std::size_t kBmsOffset = kBuildingOffset + BuildingParams::kCount;
inline constexpr std::size_t kOccupancyChannel = kBmsOffset + BmsSchedule::kCount;
inline constexpr std::size_t kWeatherOffset = kOccupancyChannel + 1;
inline constexpr std::size_t kInputChannels = kWeatherOffset + WeatherRecord::kCount;

inline std::vector<std::string> input_channel_names() {
  std::vector<std::string> names;
  for (auto n : BuildingParams::names()) names.emplace_back(n);
  for (auto n : BmsSchedule::names()) names.emplace_back(n);
  names.emplace_back("occupancy_fraction");
  for (auto n : WeatherRecord::names()) names.emplace_back(n);
  return names;
}

inline void check_horizon(std::size_t horizon) {
  if (horizon == 0 || horizon % kHoursPerDay != 0)
    throw InputError("horizon must be a positive multiple of 24 hours, got " + std::to_string(horizon));
}

// Hourly channels of the BMS settings: column i holds variable i, each day's
// value repeated for that day's 24 hours.
inline Matrix expand_daily(const BmsSchedule& bms, std::size_t horizon = kHoursPerWeek) {
  check_horizon(horizon);
  Matrix out(horizon, BmsSchedule::kCount);
  for (std::size_t h = 0; h < horizon; ++h) {
    const std::size_t day = (h / kHoursPerDay) % kDaysPerWeek;
    for (std::size_t i = 0; i < BmsSchedule::kCount; ++i) out(h, i) = bms[i][day];
  }
  return out;
}

// Fraction of max_occupants present at each hour (1 inside the weekday window, else 0).
inline std::vector<double> expand_daily(const OccupancySchedule& occ, std::size_t horizon = kHoursPerWeek) {
  check_horizon(horizon);
  std::vector<double> out(horizon);
  for (std::size_t h = 0; h < horizon; ++h) out[h] = occ.occupied(h % kHoursPerWeek) ? 1.0 : 0.0;
  return out;
}

struct Episode {
  Matrix inputs;                   // [168 x kInputChannels]
  Matrix targets;                  // [168 x 8]; empty when unlabeled
  std::vector<bool> occupied_mask;  // 168

  bool operator==(const Episode&) const = default;
};

inline Matrix assemble_inputs(const Scenario& s, const WeatherSeries& weather) {
  Matrix in(kHoursPerWeek, kInputChannels);
  const Matrix bms = expand_daily(s.bms);
  const std::vector<double> occ = expand_daily(s.occupancy);
  for (std::size_t h = 0; h < kHoursPerWeek; ++h) {
    for (std::size_t i = 0; i < BuildingParams::kCount; ++i) in(h, kBuildingOffset + i) = s.building[i];
    for (std::size_t i = 0; i < BmsSchedule::kCount; ++i) in(h, kBmsOffset + i) = bms(h, i);
    in(h, kOccupancyChannel) = occ[h];
    for (std::size_t i = 0; i < WeatherRecord::kCount; ++i) in(h, kWeatherOffset + i) = weather[h][i];
  }
  return in;
}

inline Matrix targets_matrix(const SimOutput& out) {
  Matrix t(out.size(), kOutputChannels);
  for (std::size_t h = 0; h < out.size(); ++h)
    for (std::size_t c = 0; c < kOutputChannels; ++c) t(h, c) = out[h][c];
  return t;
}

inline std::vector<bool> occupied_mask(const OccupancySchedule& occ) {
  std::vector<bool> mask(kHoursPerWeek);
  for (std::size_t h = 0; h < kHoursPerWeek; ++h) mask[h] = occ.occupied(h);
  return mask;
}

inline Episode assemble_episode(const Scenario& s, const WeatherSeries& weather, const SimOutput* labels = nullptr) {
  Episode e;
  e.inputs = assemble_inputs(s, weather);
  if (labels) e.targets = targets_matrix(*labels);
  e.occupied_mask = occupied_mask(s.occupancy);
  return e;
}

// Per-channel transforms. Inputs: min-max onto [0, 1]; targets: standardized.
struct NormStats {
  std::vector<double> input_lo, input_hi;
  std::vector<bool> input_flagged;  // zero-width range, mapped to 0.5
  std::array<double, kOutputChannels> target_mean{}, target_std{};
  double aggregate_mean = 0.0, aggregate_std = 1.0;  // heat aggregate in physical units

  bool operator==(const NormStats&) const = default;

  double normalize_input(std::size_t c, double v) const {
    if (input_flagged[c]) return 0.5;
    return (v - input_lo[c]) / (input_hi[c] - input_lo[c]);
  }
  double denormalize_input(std::size_t c, double v) const {
    if (input_flagged[c]) return input_lo[c];
    return input_lo[c] + v * (input_hi[c] - input_lo[c]);
  }
  double normalize_target(std::size_t c, double v) const { return (v - target_mean[c]) / target_std[c]; }
  double denormalize_target(std::size_t c, double v) const { return target_mean[c] + v * target_std[c]; }

  // Weights w such that (aggregate(a) - aggregate(b)) / aggregate_std = sum_c w_c (a_c - b_c)
  // for standardized outputs a, b.
  std::array<double, kOutputChannels> aggregate_weights() const {
    std::array<double, kOutputChannels> w{};
    for (auto c : kHeatAggregateChannels) w[c] = target_std[c] / aggregate_std;
    return w;
  }
};

// Fits input ranges (schema for range-bounded channels, observed min/max for
// weather) and target moments on the training episodes.
inline NormStats fit_norm_stats(const Schema& schema, std::span<const Episode> training) {
  if (training.empty()) throw InputError("cannot fit normalization on an empty training set");
  NormStats st;
  st.input_lo.assign(kInputChannels, 0.0);
  st.input_hi.assign(kInputChannels, 1.0);
  st.input_flagged.assign(kInputChannels, false);
  for (std::size_t i = 0; i < BuildingParams::kCount; ++i) {
    const auto& spec = schema.at(BuildingParams::names()[i]);
    st.input_lo[kBuildingOffset + i] = spec.min;
    st.input_hi[kBuildingOffset + i] = spec.max;
  }
  for (std::size_t i = 0; i < BmsSchedule::kCount; ++i) {
    const auto& spec = schema.at(BmsSchedule::names()[i]);
    st.input_lo[kBmsOffset + i] = spec.min;
    st.input_hi[kBmsOffset + i] = spec.max;
  }
  for (std::size_t i = 0; i < WeatherRecord::kCount; ++i) {
    const std::size_t c = kWeatherOffset + i;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& e : training)
      for (std::size_t h = 0; h < e.inputs.rows(); ++h) {
        lo = std::min(lo, e.inputs(h, c));
        hi = std::max(hi, e.inputs(h, c));
      }
    st.input_lo[c] = lo;
    st.input_hi[c] = hi;
  }
  for (std::size_t c = 0; c < kInputChannels; ++c)
    st.input_flagged[c] = !(st.input_hi[c] - st.input_lo[c] > 0.0);

  std::array<double, kOutputChannels> sum{}, sq{};
  double agg_sum = 0, agg_sq = 0;
  std::size_t n = 0;
  for (const auto& e : training) {
    if (e.targets.rows() == 0) throw InputError("training episode without targets");
    for (std::size_t h = 0; h < e.targets.rows(); ++h) {
      double agg = 0;
      for (std::size_t c = 0; c < kOutputChannels; ++c) {
        const double v = e.targets(h, c);
        sum[c] += v;
        sq[c] += v * v;
      }
      for (auto c : kHeatAggregateChannels) agg += e.targets(h, c);
      agg_sum += agg;
      agg_sq += agg * agg;
      ++n;
    }
  }
  const double dn = static_cast<double>(n);
  for (std::size_t c = 0; c < kOutputChannels; ++c) {
    st.target_mean[c] = sum[c] / dn;
    const double var = std::max(0.0, sq[c] / dn - st.target_mean[c] * st.target_mean[c]);
    st.target_std[c] = var > 0 ? std::sqrt(var) : 1.0;
  }
  st.aggregate_mean = agg_sum / dn;
  const double agg_var = std::max(0.0, agg_sq / dn - st.aggregate_mean * st.aggregate_mean);
  st.aggregate_std = agg_var > 0 ? std::sqrt(agg_var) : 1.0;
  return st;
}

inline Matrix normalize_inputs(const NormStats& st, const Matrix& raw) {
  if (raw.cols() != st.input_lo.size())
    throw ShapeError("input width " + std::to_string(raw.cols()) + " does not match normalization width " +
                     std::to_string(st.input_lo.size()));
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t h = 0; h < raw.rows(); ++h)
    for (std::size_t c = 0; c < raw.cols(); ++c) out(h, c) = st.normalize_input(c, raw(h, c));
  return out;
}

inline Matrix denormalize_inputs(const NormStats& st, const Matrix& norm) {
  Matrix out(norm.rows(), norm.cols());
  for (std::size_t h = 0; h < norm.rows(); ++h)
    for (std::size_t c = 0; c < norm.cols(); ++c) out(h, c) = st.denormalize_input(c, norm(h, c));
  return out;
}

inline Matrix normalize_targets(const NormStats& st, const Matrix& raw) {
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t h = 0; h < raw.rows(); ++h)
    for (std::size_t c = 0; c < raw.cols(); ++c) out(h, c) = st.normalize_target(c, raw(h, c));
  return out;
}

inline Matrix denormalize_targets(const NormStats& st, const Matrix& norm) {
  Matrix out(norm.rows(), norm.cols());
  for (std::size_t h = 0; h < norm.rows(); ++h)
    for (std::size_t c = 0; c < norm.cols(); ++c) out(h, c) = st.denormalize_target(c, norm(h, c));
  return out;
}

inline Episode normalize(const Episode& e, const NormStats& st) {
  Episode out;
  out.inputs = normalize_inputs(st, e.inputs);
  if (e.targets.rows() > 0) out.targets = normalize_targets(st, e.targets);
  out.occupied_mask = e.occupied_mask;
  return out;
}

inline Episode denormalize(const Episode& e, const NormStats& st) {
  Episode out;
  out.inputs = denormalize_inputs(st, e.inputs);
  if (e.targets.rows() > 0) out.targets = denormalize_targets(st, e.targets);
  out.occupied_mask = e.occupied_mask;
  return out;
}

}  // namespace bemopt
