#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "bemopt/calib/cmaes.hpp"
#include "bemopt/core/episode.hpp"
#include "bemopt/model/metamodel.hpp"
#include "bemopt/train/metrics.hpp"
#include "bemopt/train/trainer.hpp"
#include "bemopt/util/digest.hpp"

namespace bemopt::calib {

// One week of measurements: mean indoor temperature and metered heat aggregate.
struct SensorTrace {
  std::vector<double> t_int;
  std::vector<double> q_heat;

  void validate() const {
    if (t_int.size() != kHoursPerWeek || q_heat.size() != kHoursPerWeek)
      throw InputError("sensor trace must hold " + std::to_string(kHoursPerWeek) + " hours, got " +
                       std::to_string(t_int.size()) + " temperatures and " + std::to_string(q_heat.size()) +
                       " consumptions");
    for (std::size_t h = 0; h < kHoursPerWeek; ++h)
      if (!std::isfinite(t_int[h]) || !std::isfinite(q_heat[h]))
        throw InputError("sensor trace has a non-finite value at hour " + std::to_string(h));
  }
};

// Sensor aggregation of a simulator output.
inline SensorTrace sensor_trace(const SimOutput& out) {
  SensorTrace t;
  for (const auto& r : out.hours) {
    t.t_int.push_back(r[kTIntOffice]);
    t.q_heat.push_back(r.heat_aggregate());
  }
  return t;
}

struct CalibrationWeek {
  WeatherSeries weather;
  SensorTrace trace;
};

// Free variables searched over their schema range; everything else is pinned
// to the values in `fixed`.
struct CalibrationSpace {
  std::vector<VariableRef> free;
  Scenario fixed;

  std::size_t dimension() const { return free.size(); }
};

inline const VariableSpec& spec_of(const Schema& schema, const VariableRef& ref) { return schema.at(ref.name); }

inline void check_space(const Schema& schema, const CalibrationSpace& space) {
  if (space.free.empty()) throw InputError("calibration space has no free variable");
  for (std::size_t i = 0; i < space.free.size(); ++i) {
    const auto& ref = space.free[i];
    spec_of(schema, ref);
    Scenario probe = space.fixed;
    variable(probe, ref);
    for (std::size_t j = 0; j < i; ++j)
      if (space.free[j] == ref) throw InputError("calibration variable '" + ref.label() + "' listed twice");
  }
}

// Heating comfort setpoint kept at or above the reduced one.
inline void repair_bms(BmsSchedule& bms) {
  for (std::size_t d = 0; d < kDaysPerWeek; ++d)
    if (bms.t_heat_conf[d] < bms.t_heat_red[d]) std::swap(bms.t_heat_conf[d], bms.t_heat_red[d]);
}

// Keeps paired windows and setpoints ordered after independent quantization.
inline void repair(const Schema& schema, Scenario& s) {
  for (std::size_t d = 0; d < kWeekdays; ++d) {
    double& a = s.occupancy.start[d];
    double& b = s.occupancy.end[d];
    if (a > b) std::swap(a, b);
    if (a == b) {
      const auto& es = schema.at(OccupancySchedule::names()[kWeekdays + d]);
      const auto& ss = schema.at(OccupancySchedule::names()[d]);
      if (b + es.step <= es.max) b += es.step;
      else if (a - ss.step >= ss.min) a -= ss.step;
    }
  }
  repair_bms(s.bms);
  s.occupancy.max_occupants = s.building.nb_occupants;
}

// Unit-box point to a concrete, quantized scenario.
inline Scenario decode(const Schema& schema, const CalibrationSpace& space, const Vector& u) {
  if (static_cast<std::size_t>(u.size()) != space.dimension())
    throw ShapeError("candidate has " + std::to_string(u.size()) + " coordinates, space has " +
                     std::to_string(space.dimension()));
  Scenario s = space.fixed;
  for (std::size_t i = 0; i < space.free.size(); ++i) {
    const auto& spec = spec_of(schema, space.free[i]);
    const double x = std::clamp(u[static_cast<Eigen::Index>(i)], 0.0, 1.0);
    variable(s, space.free[i]) = spec.quantize(spec.min + x * spec.width());
  }
  repair(schema, s);
  return s;
}

// Model prediction in physical units: temperature and the metered aggregate
// (consumption channels clipped at zero).
inline train::TqSeries predict_tq(const model::Metamodel& m, const NormStats& stats, const Scenario& s,
                                  const WeatherSeries& weather) {
  const Matrix raw = assemble_inputs(s, weather);
  const Matrix out = denormalize_targets(stats, m.predict(normalize_inputs(stats, raw)));
  train::TqSeries tq;
  for (std::size_t h = 0; h < out.rows(); ++h) {
    tq.t.push_back(out(h, kTIntOffice));
    double q = 0;
    for (auto c : kHeatAggregateChannels) q += std::max(0.0, out(h, c));
    tq.q.push_back(q);
  }
  return tq;
}

inline train::TqSeries as_series(const SensorTrace& t) { return {t.t_int, t.q_heat}; }

constexpr double kWorstCost = 1e6;

inline double cost_from_r2(double r2_t, double r2_q) { return 1.0 - 0.5 * (r2_t + r2_q); }

// 1 - (R2_T + R2_Q) / 2, averaged over weeks.
inline double calibration_cost(const model::Metamodel& m, const NormStats& stats, const Scenario& s,
                               std::span<const CalibrationWeek> weeks) {
  double total = 0;
  for (const auto& w : weeks) {
    train::TqSeries p;
    try {
      p = predict_tq(m, stats, s, w.weather);
    } catch (const NumericalError&) {
      return kWorstCost;
    }
    const double c = cost_from_r2(train::r2_score(w.trace.t_int, p.t), train::r2_score(w.trace.q_heat, p.q));
    if (!std::isfinite(c)) return kWorstCost;
    total += c;
  }
  return total / static_cast<double>(weeks.size());
}

// SHA-256 over parameter names, shapes and values.
inline std::string parameter_checksum(const model::ParameterSet& ps) {
  std::string bytes;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    bytes += ps[i].name;
    bytes += ad::shape_string(ps[i].value.shape());
    const auto& v = ps[i].value.values();
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  return sha256_hex(bytes);
}

struct CalibrationOptions {
  std::size_t generations = 500;
  double initial_sigma = 0.3;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

struct WeekReport {
  train::EpisodeMetrics metrics;
  double cost = 0;
};

struct CalibrationResult {
  Scenario best;
  Vector best_unit;
  double best_cost = 0;
  double initial_cost = 0;
  std::vector<double> history;  // best-so-far per generation
  std::size_t evaluations = 0;
  std::string checksum_before, checksum_after;
  std::vector<WeekReport> weeks;
};

inline WeekReport week_report(const model::Metamodel& m, const NormStats& stats, const Scenario& s,
                              const CalibrationWeek& w) {
  const auto p = predict_tq(m, stats, s, w.weather);
  WeekReport r;
  r.metrics = train::tq_metrics(p, as_series(w.trace), occupied_mask(s.occupancy));
  r.cost = cost_from_r2(r.metrics.r2_t, r.metrics.r2_q);
  return r;
}

// CMA-ES over the unit box of the free variables with the metamodel frozen.
inline CalibrationResult calibrate(model::Metamodel& m, const NormStats& stats, const Schema& schema,
                                   const CalibrationSpace& space, std::span<const CalibrationWeek> weeks,
                                   const CalibrationOptions& opt) {
  check_space(schema, space);
  if (weeks.empty()) throw InputError("calibration needs at least one week of traces");
  for (const auto& w : weeks) w.trace.validate();

  CalibrationResult r;
  r.checksum_before = parameter_checksum(m.parameters());
  m.set_frozen(true);
  const model::Metamodel& frozen = m;
  auto cost = [&](const Vector& u) { return calibration_cost(frozen, stats, decode(schema, space, u), weeks); };

  CmaOptions co;
  co.initial_mean = Vector::Constant(static_cast<Eigen::Index>(space.dimension()), 0.5);
  co.initial_sigma = opt.initial_sigma;
  co.lower = Vector::Zero(co.initial_mean.size());
  co.upper = Vector::Ones(co.initial_mean.size());
  co.max_sigma = 1.0;

  r.initial_cost = cost(co.initial_mean);
  r.best_unit = co.initial_mean;
  r.best_cost = r.initial_cost;
  r.evaluations = 1;
  CmaEs es(co, opt.seed);
  for (std::size_t g = 0; g < opt.generations; ++g) {
    const auto xs = es.ask();
    std::vector<double> fit(xs.size());
    train::parallel_for(xs.size(), opt.jobs, [&](std::size_t i) { fit[i] = cost(xs[i]); });
    r.evaluations += xs.size();
    es.tell(xs, fit);
    if (es.best_fitness() < r.best_cost) {
      r.best_cost = es.best_fitness();
      r.best_unit = es.best();
    }
    r.history.push_back(r.best_cost);
  }
  r.best = decode(schema, space, r.best_unit);
  for (const auto& w : weeks) r.weeks.push_back(week_report(frozen, stats, r.best, w));
  r.checksum_after = parameter_checksum(m.parameters());
  return r;
}

inline nlohmann::json to_json(const WeekReport& w) {
  nlohmann::json j = train::to_json(w.metrics);
  j["cost"] = w.cost;
  return j;
}

}  // namespace bemopt::calib
