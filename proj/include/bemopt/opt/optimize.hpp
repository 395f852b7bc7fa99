#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "bemopt/calib/calibrate.hpp"
#include "bemopt/opt/nsga2.hpp"

namespace bemopt::opt {

constexpr double kComfortReference = 22.5;

struct ComfortOptions {
  double reference = kComfortReference;
  // false: sqrt(sum over occupied hours of (T - T*)^2) / N_occ, as printed;
  // true: root mean square over occupied hours.
  bool rmse = false;
};

// Comfort gap over occupied hours and mean consumption over the horizon.
inline Objectives objectives(std::span<const double> t, std::span<const double> q, const std::vector<bool>& occupied,
                             const ComfortOptions& opt = {}) {
  if (t.size() != occupied.size() || q.size() != occupied.size() || q.empty())
    throw ShapeError("objectives: series and occupancy mask lengths differ");
  double sq = 0, qsum = 0;
  std::size_t n_occ = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    qsum += q[k];
    if (!occupied[k]) continue;
    sq += (t[k] - opt.reference) * (t[k] - opt.reference);
    ++n_occ;
  }
  Objectives o{0.0, qsum / static_cast<double>(q.size())};
  if (n_occ > 0) o[0] = opt.rmse ? std::sqrt(sq / static_cast<double>(n_occ)) : std::sqrt(sq) / static_cast<double>(n_occ);
  return o;
}

// BMS search problem around a calibrated scenario: only the 84 daily BMS
// settings move, building parameters and occupancy stay as given.
struct BmsProblem {
  const model::Metamodel* model = nullptr;
  const NormStats* stats = nullptr;
  const Schema* schema = nullptr;
  Scenario base;
  WeatherSeries weather;
  ComfortOptions comfort;

  std::vector<double> lower() const {
    std::vector<double> v;
    for (const auto& ref : bms_variables()) v.push_back(schema->at(ref.name).min);
    return v;
  }
  std::vector<double> upper() const {
    std::vector<double> v;
    for (const auto& ref : bms_variables()) v.push_back(schema->at(ref.name).max);
    return v;
  }

  // Continuous coordinates quantized to the schema grid.
  Scenario scenario(const std::vector<double>& x) const {
    const auto refs = bms_variables();
    if (x.size() != refs.size())
      throw ShapeError("BMS vector has " + std::to_string(x.size()) + " entries, expected " + std::to_string(refs.size()));
    Scenario s = base;
    for (std::size_t i = 0; i < refs.size(); ++i) variable(s, refs[i]) = schema->at(refs[i].name).quantize(x[i]);
    calib::repair_bms(s.bms);
    return s;
  }

  static std::vector<double> coordinates(const BmsSchedule& bms) {
    Scenario s;
    s.bms = bms;
    std::vector<double> x;
    for (const auto& ref : bms_variables()) x.push_back(variable(s, ref));
    return x;
  }

  Objectives evaluate(const std::vector<double>& x) const { return evaluate_scenario(scenario(x)); }

  Objectives evaluate_scenario(const Scenario& s) const {
    const auto tq = calib::predict_tq(*model, *stats, s, weather);
    return objectives(tq.t, tq.q, occupied_mask(s.occupancy), comfort);
  }
};

// Same objectives computed on a simulator output.
inline Objectives simulated_objectives(const SimOutput& out, const OccupancySchedule& occ, const ComfortOptions& opt = {}) {
  const auto trace = calib::sensor_trace(out);
  return objectives(trace.t_int, trace.q_heat, occupied_mask(occ), opt);
}

struct Selection {
  std::size_t index = 0;
  Solution solution;
  double savings = 0;     // 1 - Q_chosen / Q_baseline
  bool fallback = false;  // no member within the comfort tolerance
};

// Lowest-consumption member whose comfort gap is within `tolerance` of the
// baseline; otherwise the member with the smallest comfort gap, flagged.
inline Selection select_equivalent_comfort(const std::vector<Solution>& front, const Objectives& baseline,
                                           double tolerance = 0.05) {
  if (front.empty()) throw InputError("cannot select from an empty front");
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < front.size(); ++i)
    if (front[i].f[0] <= baseline[0] + tolerance && (!pick || front[i].f[1] < front[*pick].f[1])) pick = i;
  Selection s;
  if (!pick) {
    s.fallback = true;
    pick = 0;
    for (std::size_t i = 1; i < front.size(); ++i)
      if (front[i].f[0] < front[*pick].f[0]) pick = i;
  }
  s.index = *pick;
  s.solution = front[*pick];
  s.savings = baseline[1] != 0.0 ? 1.0 - s.solution.f[1] / baseline[1] : 0.0;
  return s;
}

struct OptimizationResult {
  ParetoFront front;
  Objectives baseline{};
  Selection chosen;
  Scenario chosen_scenario;
};

// NSGA-II over the BMS box. The baseline settings join the initial population
// so the front always holds a member at least as good as the current operation.
inline OptimizationResult optimize_bms(const BmsProblem& problem, const NsgaConfig& cfg, std::uint64_t seed,
                                       unsigned jobs = 1, double tolerance = 0.05) {
  OptimizationResult r;
  r.baseline = problem.evaluate_scenario(problem.base);
  r.front = nsga2_run(cfg, [&](const std::vector<double>& x) { return problem.evaluate(x); }, problem.lower(),
                      problem.upper(), seed, jobs, {BmsProblem::coordinates(problem.base.bms)});
  if (r.front.members.empty()) throw NumericalError("optimization produced no valid solution");
  r.chosen = select_equivalent_comfort(r.front.members, r.baseline, tolerance);
  r.chosen_scenario = problem.scenario(r.chosen.solution.x);
  return r;
}

}  // namespace bemopt::opt
