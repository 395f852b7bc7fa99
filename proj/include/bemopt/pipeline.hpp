#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bemopt/io/serialize.hpp"
#include "bemopt/opt/optimize.hpp"
#include "bemopt/sim/weather.hpp"
#include "bemopt/train/trainer.hpp"
#include "bemopt/util/digest.hpp"

#ifndef BEMOPT_VERSION
#define BEMOPT_VERSION "0.1.0"
#endif

namespace bemopt::pipeline {

using io::json;
namespace fs = std::filesystem;

// Every tunable of the pipeline, read from the --config JSON. Sections and
// keys not present keep their defaults; unknown ones are rejected.
struct Settings {
  sim::RcModelConfig rc;
  model::MetamodelConfig model;
  train::TrainConfig train;
  std::size_t weather_weeks = 64;
  std::size_t calibration_generations = 500;
  double calibration_sigma = 0.3;
  opt::NsgaConfig nsga;
  opt::ComfortOptions comfort;
  double tolerance = 0.05;
  double sigma_t = 0.1;
  double sigma_q = 0.02;
};

namespace detail {

using Setter = std::function<void(const json&)>;

inline void apply(const json& j, const std::string& section, const std::map<std::string, Setter>& setters) {
  if (!j.is_object()) throw InputError("config section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto s = setters.find(it.key());
    if (s == setters.end()) throw InputError("config: unknown key '" + section + "." + it.key() + "'");
    try {
      s->second(it.value());
    } catch (const json::exception& e) {
      throw InputError("config: bad value for '" + section + "." + it.key() + "': " + e.what());
    }
  }
}

template <class T>
Setter set(T& field) {
  return [&field](const json& v) { field = v.get<T>(); };
}

}  // namespace detail

inline Settings settings_from_json(const json& j) {
  Settings s;
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    if (key == "simulator") {
      s.rc = io::rc_config_from_json(v);
    } else if (key == "model") {
      try {
        s.model = model::config_from_json(v);
      } catch (const json::exception& e) {
        throw InputError(std::string("config: bad model section: ") + e.what());
      }
    } else if (key == "sample") {
      detail::apply(v, key, {{"weather_weeks", detail::set(s.weather_weeks)}});
    } else if (key == "train") {
      auto& t = s.train;
      detail::apply(v, key,
                    {{"epochs", detail::set(t.epochs)},
                     {"batch", detail::set(t.batch)},
                     {"learning_rate", detail::set(t.adam.learning_rate)},
                     {"cosine_decay", detail::set(t.cosine_decay)},
                     {"final_lr_fraction", detail::set(t.final_lr_fraction)},
                     {"loss_alpha", detail::set(t.loss.alpha)},
                     {"loss_beta", detail::set(t.loss.beta)},
                     {"loss_aux", detail::set(t.loss.aux)}});
    } else if (key == "calibrate") {
      detail::apply(v, key,
                    {{"generations", detail::set(s.calibration_generations)},
                     {"initial_sigma", detail::set(s.calibration_sigma)}});
    } else if (key == "optimize") {
      auto& n = s.nsga;
      detail::apply(v, key,
                    {{"population", detail::set(n.population)},
                     {"generations", detail::set(n.generations)},
                     {"crossover_eta", detail::set(n.crossover_eta)},
                     {"crossover_probability", detail::set(n.crossover_probability)},
                     {"mutation_eta", detail::set(n.mutation_eta)},
                     {"mutation_probability", detail::set(n.mutation_probability)},
                     {"tolerance", detail::set(s.tolerance)},
                     {"comfort_rmse", detail::set(s.comfort.rmse)}});
    } else if (key == "twin") {
      detail::apply(v, key, {{"sigma_t", detail::set(s.sigma_t)}, {"sigma_q", detail::set(s.sigma_q)}});
    } else {
      throw InputError("config: unknown section '" + key + "'");
    }
  }
  s.rc.validate();
  s.model.validate();
  s.train.validate();
  s.nsga.validate();
  if (s.weather_weeks == 0) throw InputError("config: sample.weather_weeks must be positive");
  if (!(s.calibration_sigma > 0)) throw InputError("config: calibrate.initial_sigma must be positive");
  if (s.sigma_t < 0 || s.sigma_q < 0) throw InputError("config: twin noise levels must be non-negative");
  if (s.tolerance < 0) throw InputError("config: optimize.tolerance must be non-negative");
  return s;
}

inline Settings load_settings(const std::string& path) { return settings_from_json(io::read_json(path)); }

// Common invocation context of every command.
struct Context {
  Settings settings;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string config_path;  // empty when defaults are used
};

// ---- run manifest ----

inline json digest_path(const std::string& path) {
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path).generic_string());
    std::sort(files.begin(), files.end());
    json d = json::object();
    for (const auto& f : files) d[f] = sha256_file((fs::path(path) / f).string());
    return d;
  }
  return sha256_file(path);
}

// run_manifest.json: command, seed, input and output digests, wall-clock
// duration and version. The duration makes it the one file of a run that is
// not reproducible byte for byte.
class Manifest {
 public:
  Manifest(std::string command, const Context& ctx)
      : command_(std::move(command)), seed_(ctx.seed), jobs_(ctx.jobs), start_(std::chrono::steady_clock::now()) {
    if (!ctx.config_path.empty()) input("config", ctx.config_path);
  }

  void input(const std::string& role, const std::string& path) {
    inputs_[role] = {{"path", path}, {"sha256", digest_path(path)}};
  }

  void write(const std::string& out_dir) const {
    json outputs = digest_path(out_dir);
    outputs.erase("run_manifest.json");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    io::write_json(out_dir + "/run_manifest.json", {{"command", command_},
                                                    {"seed", seed_},
                                                    {"jobs", jobs_},
                                                    {"inputs", inputs_},
                                                    {"outputs", outputs},
                                                    {"wall_clock_seconds", seconds},
                                                    {"version", BEMOPT_VERSION}});
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  unsigned jobs_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::object();
};

// ---- shared loaders ----

inline std::vector<WeatherSeries> load_weather_any(const std::string& path) {
  return fs::is_directory(path) ? io::load_weather_dir(path) : io::load_weather(path);
}

inline const WeatherSeries& pick_week(const std::vector<WeatherSeries>& weeks, std::size_t index,
                                      const std::string& path) {
  if (index >= weeks.size())
    throw InputError("'" + path + "' holds " + std::to_string(weeks.size()) + " weeks, week " + std::to_string(index) +
                     " requested");
  return weeks[index];
}

// A scenario file, or the calibrated scenario inside a calibration report.
inline Scenario load_scenario_any(const std::string& path) {
  const json j = io::read_json(path);
  if (j.contains("calibrated")) return io::scenario_from_json(j.at("calibrated"));
  return io::scenario_from_json(j);
}

// "name" frees a scalar or all seven days of a BMS variable; "name[d]" one day.
inline std::vector<VariableRef> parse_free_variables(const json& j) {
  if (!j.is_object() || !j.contains("free") || !j.at("free").is_array())
    throw InputError("calibration space must be an object with a 'free' array");
  std::vector<VariableRef> refs;
  for (const auto& item : j.at("free")) {
    if (!item.is_string()) throw InputError("calibration space: entries of 'free' must be strings");
    std::string name = item.get<std::string>();
    const auto open = name.find('[');
    if (open != std::string::npos) {
      if (name.back() != ']') throw InputError("calibration space: malformed entry '" + name + "'");
      const std::string day = name.substr(open + 1, name.size() - open - 2);
      const double d = io::parse_number(day, "calibration space entry '" + name + "'");
      refs.push_back({name.substr(0, open), static_cast<int>(d)});
    } else if (is_bms_variable(name)) {
      for (int d = 0; d < static_cast<int>(kDaysPerWeek); ++d) refs.push_back({name, d});
    } else {
      refs.push_back({name, -1});
    }
  }
  return refs;
}

inline std::vector<VariableRef> building_variables() {
  std::vector<VariableRef> refs;
  for (auto n : BuildingParams::names()) refs.push_back({std::string(n), -1});
  return refs;
}

inline std::string join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + '\n';
}

// ---- sample ----

struct SampleArgs {
  std::string schema;   // empty: built-in ranges
  std::string weather;  // CSV file or directory; empty: synthetic pool
  std::size_t examples = 2200;
  std::string out;
};

inline void cmd_sample(const SampleArgs& a, const Context& ctx) {
  Manifest man("sample", ctx);
  const Schema schema = a.schema.empty() ? default_schema() : Schema::load(a.schema);
  train::check_schema(schema);
  std::vector<WeatherSeries> pool;
  if (a.weather.empty()) {
    pool = sim::synthesize_pool(ctx.settings.weather_weeks, ctx.seed);
  } else {
    pool = load_weather_any(a.weather);
    man.input("weather", a.weather);
  }
  if (!a.schema.empty()) man.input("schema", a.schema);
  if (a.examples < 3) throw InputError("sample needs at least 3 examples");

  train::SampleOptions so;
  so.splits = train::SplitSizes::from_total(a.examples);
  so.seed = ctx.seed;
  so.rc = ctx.settings.rc;
  so.jobs = ctx.jobs;
  const train::Dataset ds = train::sample_dataset(schema, std::move(pool), so);
  const NormStats stats = fit_norm_stats(ds.schema, ds.train_episodes());
  io::save_dataset(a.out, ds, {{"simulator", io::to_json(ctx.settings.rc)}, {"norm", io::to_json(stats)}});
  man.write(a.out);
}

// ---- train ----

struct TrainArgs {
  std::string dataset;
  std::optional<std::string> kind;
  std::optional<std::size_t> epochs, batch;
  std::string out;
};

struct TrainSummary {
  train::TrainResult result;
  train::MetricReport validation, test;
};

inline TrainSummary cmd_train(const TrainArgs& a, const Context& ctx,
                              const std::function<void(const train::EpochRecord&)>& on_epoch = {}) {
  Manifest man("train", ctx);
  const train::Dataset ds = io::load_dataset(a.dataset);
  man.input("dataset", a.dataset);

  model::MetamodelConfig mc = ctx.settings.model;
  if (a.kind) mc.kind = model::parse_model_kind(*a.kind);
  train::TrainConfig tc = ctx.settings.train;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.batch) tc.batch = *a.batch;
  tc.seed = ctx.seed;
  tc.jobs = ctx.jobs;

  const auto training = ds.train_episodes();
  const NormStats stats = fit_norm_stats(ds.schema, training);
  const auto tr = train::prepare(training, stats);
  const auto va = train::prepare(ds.validation_episodes(), stats);
  const auto te = train::prepare(ds.test_episodes(), stats);

  model::Metamodel m = model::Metamodel::create(mc, ctx.seed);
  TrainSummary s;
  s.result = train::train(m, tr, va, stats, tc, on_epoch);
  s.validation = train::evaluate(m, va, stats, tc.loss, ctx.jobs);
  s.test = train::evaluate(m, te, stats, tc.loss, ctx.jobs);

  fs::create_directories(a.out);
  std::string hist = "epoch,train_loss,val_loss,val_mse_t,val_mse_q,val_r2_t,val_r2_q\n";
  for (const auto& r : s.result.history)
    hist += join({std::to_string(r.epoch), io::num(r.train_loss), io::num(r.validation.loss.mean),
                  io::num(r.validation.mse_t.mean), io::num(r.validation.mse_q.mean), io::num(r.validation.r2_t.mean),
                  io::num(r.validation.r2_q.mean)});
  io::write_file(a.out + "/history.csv", hist);
  io::write_json(a.out + "/metrics.json", {{"model", model::to_json(mc)},
                                           {"epochs", tc.epochs},
                                           {"batch", tc.batch},
                                           {"learning_rate", tc.adam.learning_rate},
                                           {"best_epoch", s.result.best_epoch},
                                           {"best_validation_loss", s.result.best_validation_loss},
                                           {"diverged", s.result.diverged},
                                           {"skipped_steps", s.result.skipped_steps},
                                           {"validation", train::to_json(s.validation)},
                                           {"test", train::to_json(s.test)}});
  io::save_checkpoint(a.out + "/model", m, stats, {{"best_epoch", s.result.best_epoch}});
  man.write(a.out);
  if (s.result.diverged)
    throw NumericalError("training diverged after epoch " + std::to_string(s.result.history.size() - 1) +
                         "; the best checkpoint was saved");
  return s;
}

// ---- twin ----

struct TwinArgs {
  std::string scenario;
  std::string weather;
  std::size_t week = 0;
  std::optional<double> sigma_t, sigma_q;
  std::string out;
};

// Oracle trace of a scenario with seeded Gaussian noise: additive on the
// temperature, multiplicative on the consumption.
inline calib::SensorTrace twin_trace(const Scenario& s, const WeatherSeries& weather, const sim::RcModelConfig& rc,
                                     double sigma_t, double sigma_q, std::uint64_t seed) {
  calib::SensorTrace t = calib::sensor_trace(sim::simulate_settled_week(s, weather, rc));
  Rng rng = Rng::stream(seed, "twin");
  for (std::size_t h = 0; h < t.t_int.size(); ++h) {
    t.t_int[h] += rng.normal(0.0, sigma_t);
    t.q_heat[h] *= 1.0 + rng.normal(0.0, sigma_q);
  }
  return t;
}

inline void cmd_twin(const TwinArgs& a, const Context& ctx) {
  Manifest man("twin", ctx);
  const Scenario s = io::load_scenario(a.scenario);
  validate(default_schema(), s);
  const auto weeks = load_weather_any(a.weather);
  const WeatherSeries& w = pick_week(weeks, a.week, a.weather);
  man.input("scenario", a.scenario);
  man.input("weather", a.weather);
  const double st = a.sigma_t.value_or(ctx.settings.sigma_t), sq = a.sigma_q.value_or(ctx.settings.sigma_q);
  if (st < 0 || sq < 0) throw InputError("noise levels must be non-negative");
  fs::create_directories(a.out);
  io::write_file(a.out + "/trace.csv", io::trace_csv(twin_trace(s, w, ctx.settings.rc, st, sq, ctx.seed)));
  io::write_file(a.out + "/truth.csv", io::trace_csv(twin_trace(s, w, ctx.settings.rc, 0, 0, ctx.seed)));
  man.write(a.out);
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string model;
  std::vector<std::string> traces;
  std::string weather;
  std::vector<std::size_t> weeks;  // weather week per trace; empty: 0, 1, ...
  std::string scenario;            // fixed inputs
  std::string space;               // empty: all building parameters free
  std::string holdout_trace;
  std::size_t holdout_week = 0;
  std::optional<std::size_t> budget;
  std::string out;
};

struct CalibrateSummary {
  calib::CalibrationResult result;
  std::optional<calib::WeekReport> holdout;
};

inline CalibrateSummary cmd_calibrate(const CalibrateArgs& a, const Context& ctx) {
  Manifest man("calibrate", ctx);
  io::Checkpoint ck = io::load_checkpoint(a.model);
  man.input("model", a.model);
  if (a.traces.empty()) throw InputError("calibrate needs at least one --traces file");
  if (!a.weeks.empty() && a.weeks.size() != a.traces.size())
    throw InputError("--weeks must list one weather week per trace");
  const auto weather = load_weather_any(a.weather);
  man.input("weather", a.weather);

  std::vector<calib::CalibrationWeek> weeks;
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    const std::size_t wi = a.weeks.empty() ? i : a.weeks[i];
    weeks.push_back({pick_week(weather, wi, a.weather), io::load_trace(a.traces[i])});
    man.input("trace_" + std::to_string(i), a.traces[i]);
  }
  const Schema schema = default_schema();
  calib::CalibrationSpace space;
  space.fixed = io::load_scenario(a.scenario);
  man.input("scenario", a.scenario);
  if (a.space.empty()) {
    space.free = building_variables();
  } else {
    space.free = parse_free_variables(io::read_json(a.space));
    man.input("space", a.space);
  }

  calib::CalibrationOptions co;
  co.generations = a.budget.value_or(ctx.settings.calibration_generations);
  co.initial_sigma = ctx.settings.calibration_sigma;
  co.seed = ctx.seed;
  co.jobs = ctx.jobs;
  CalibrateSummary s;
  s.result = calib::calibrate(ck.model, ck.stats, schema, space, weeks, co);

  std::optional<calib::CalibrationWeek> holdout;
  if (!a.holdout_trace.empty()) {
    holdout = calib::CalibrationWeek{pick_week(weather, a.holdout_week, a.weather), io::load_trace(a.holdout_trace)};
    holdout->trace.validate();
    man.input("holdout_trace", a.holdout_trace);
    s.holdout = calib::week_report(ck.model, ck.stats, s.result.best, *holdout);
  }

  fs::create_directories(a.out);
  json free = json::object();
  for (const auto& ref : space.free) free[ref.label()] = variable(s.result.best, ref);
  json week_reports = json::array();
  for (const auto& w : s.result.weeks) week_reports.push_back(calib::to_json(w));
  io::write_json(a.out + "/calibration.json",
                 {{"initial_cost", s.result.initial_cost},
                  {"best_cost", s.result.best_cost},
                  {"evaluations", s.result.evaluations},
                  {"generations", co.generations},
                  {"checksum_before", s.result.checksum_before},
                  {"checksum_after", s.result.checksum_after},
                  {"free", free},
                  {"weeks", week_reports},
                  {"holdout", s.holdout ? calib::to_json(*s.holdout) : json(nullptr)},
                  {"calibrated", io::to_json(s.result.best)}});

  std::string hist = "generation,best_cost\n";
  for (std::size_t g = 0; g < s.result.history.size(); ++g)
    hist += join({std::to_string(g + 1), io::num(s.result.history[g])});
  io::write_file(a.out + "/history.csv", hist);

  std::string fit = "set,week,hour,t_observed,t_fitted,q_observed,q_fitted\n";
  auto series = [&](const std::string& set, std::size_t index, const calib::CalibrationWeek& w) {
    const auto p = calib::predict_tq(ck.model, ck.stats, s.result.best, w.weather);
    for (std::size_t h = 0; h < p.t.size(); ++h)
      fit += join({set, std::to_string(index), std::to_string(h), io::num(w.trace.t_int[h]), io::num(p.t[h]),
                   io::num(w.trace.q_heat[h]), io::num(p.q[h])});
  };
  for (std::size_t i = 0; i < weeks.size(); ++i) series("calibration", i, weeks[i]);
  if (holdout) series("holdout", 0, *holdout);
  io::write_file(a.out + "/fitted.csv", fit);
  man.write(a.out);
  return s;
}

// ---- optimize ----

struct OptimizeArgs {
  std::string model;
  std::string calibrated;  // calibration report or scenario JSON
  std::string weather;
  std::size_t week = 0;
  std::optional<std::size_t> generations, population;
  std::string out;
};

inline opt::OptimizationResult cmd_optimize(const OptimizeArgs& a, const Context& ctx) {
  Manifest man("optimize", ctx);
  const io::Checkpoint ck = io::load_checkpoint(a.model);
  man.input("model", a.model);
  const Schema schema = default_schema();
  opt::BmsProblem problem;
  problem.model = &ck.model;
  problem.stats = &ck.stats;
  problem.schema = &schema;
  problem.base = load_scenario_any(a.calibrated);
  man.input("calibrated", a.calibrated);
  const auto weather = load_weather_any(a.weather);
  problem.weather = pick_week(weather, a.week, a.weather);
  man.input("weather", a.weather);
  problem.comfort = ctx.settings.comfort;

  opt::NsgaConfig cfg = ctx.settings.nsga;
  if (a.generations) cfg.generations = *a.generations;
  if (a.population) cfg.population = *a.population;
  const opt::OptimizationResult r = opt::optimize_bms(problem, cfg, ctx.seed, ctx.jobs, ctx.settings.tolerance);

  fs::create_directories(a.out);
  const auto refs = bms_variables();
  std::vector<std::string> header = {"comfort", "consumption"};
  for (const auto& ref : refs) header.push_back(ref.label());
  std::string front = join(header);
  for (const auto& m : r.front.members) {
    const Scenario s = problem.scenario(m.x);
    std::vector<std::string> row = {io::num(m.f[0]), io::num(m.f[1])};
    for (const auto& ref : refs) row.push_back(io::num(variable(s, ref)));
    front += join(row);
  }
  io::write_file(a.out + "/front.csv", front);

  std::string hv = "generation,hypervolume\n";
  for (std::size_t g = 0; g < r.front.hypervolume.size(); ++g)
    hv += join({std::to_string(g), io::num(r.front.hypervolume[g])});
  io::write_file(a.out + "/hypervolume.csv", hv);

  io::write_json(a.out + "/chosen.json",
                 {{"baseline", {{"comfort", r.baseline[0]}, {"consumption", r.baseline[1]}}},
                  {"chosen", {{"comfort", r.chosen.solution.f[0]}, {"consumption", r.chosen.solution.f[1]}}},
                  {"savings", r.chosen.savings},
                  {"fallback", r.chosen.fallback},
                  {"tolerance", ctx.settings.tolerance},
                  {"front_size", r.front.members.size()},
                  {"generations", cfg.generations},
                  {"population", cfg.population},
                  {"scenario", io::to_json(r.chosen_scenario)}});

  const auto base = calib::predict_tq(ck.model, ck.stats, problem.base, problem.weather);
  const auto chosen = calib::predict_tq(ck.model, ck.stats, r.chosen_scenario, problem.weather);
  const auto occ = occupied_mask(problem.base.occupancy);
  std::string ts = "hour,occupied,t_baseline,q_baseline,t_chosen,q_chosen\n";
  for (std::size_t h = 0; h < base.t.size(); ++h)
    ts += join({std::to_string(h), occ[h] ? "1" : "0", io::num(base.t[h]), io::num(base.q[h]), io::num(chosen.t[h]),
                io::num(chosen.q[h])});
  io::write_file(a.out + "/chosen_series.csv", ts);
  man.write(a.out);
  return r;
}

// ---- report ----

namespace detail {

inline std::string stat(const json& j) {
  if (j.is_null()) return "n/a";
  return io::num(j.at("mean").get<double>()) + " +/- " + io::num(j.at("std").get<double>());
}

inline std::string value(const json& j) { return j.is_null() ? "n/a" : io::num(j.get<double>()); }

inline void training_block(std::string& out, const std::string& path, const json& m) {
  out += "== training: " + path + "\n";
  out += "model " + m.at("model").at("kind").get<std::string>() + ", best epoch " +
         std::to_string(m.at("best_epoch").get<std::size_t>()) + " of " + std::to_string(m.at("epochs").get<std::size_t>()) +
         (m.at("diverged").get<bool>() ? " (diverged)" : "") + "\n";
  for (const char* split : {"validation", "test"}) {
    const json& r = m.at(split);
    if (r.at("episodes").get<std::size_t>() == 0) continue;
    out += std::string(split) + " (" + std::to_string(r.at("episodes").get<std::size_t>()) + " weeks)\n";
    for (const char* k : {"loss", "mse_t", "mse_q", "mse_t_occ", "mse_q_occ", "r2_t", "r2_q"})
      out += "  " + std::string(k) + " " + stat(r.at(k)) + "\n";
  }
}

inline void week_line(std::string& out, const std::string& label, const json& w) {
  out += "  " + label + ": MSE_T " + value(w.at("mse_t")) + ", MSE_Q " + value(w.at("mse_q")) + ", MSE_T occ " +
         value(w.at("mse_t_occ")) + ", MSE_Q occ " + value(w.at("mse_q_occ")) + ", R2_T " + value(w.at("r2_t")) +
         ", R2_Q " + value(w.at("r2_q")) + "\n";
}

inline void calibration_block(std::string& out, const std::string& path, const json& c) {
  out += "== calibration: " + path + "\n";
  out += "cost " + io::num(c.at("initial_cost").get<double>()) + " -> " + io::num(c.at("best_cost").get<double>()) +
         " after " + std::to_string(c.at("evaluations").get<std::size_t>()) + " evaluations\n";
  const json& weeks = c.at("weeks");
  for (std::size_t i = 0; i < weeks.size(); ++i) week_line(out, "calibration week " + std::to_string(i), weeks[i]);
  if (!c.at("holdout").is_null()) week_line(out, "held-out week", c.at("holdout"));
  out += "weights unchanged: " + std::string(c.at("checksum_before") == c.at("checksum_after") ? "yes" : "no") + "\n";
}

inline void optimization_block(std::string& out, const std::string& path, const json& c) {
  out += "== optimization: " + path + "\n";
  out += "front of " + std::to_string(c.at("front_size").get<std::size_t>()) + " solutions after " +
         std::to_string(c.at("generations").get<std::size_t>()) + " generations\n";
  out += "baseline comfort " + io::num(c.at("baseline").at("comfort").get<double>()) + ", consumption " +
         io::num(c.at("baseline").at("consumption").get<double>()) + "\n";
  out += "chosen comfort " + io::num(c.at("chosen").at("comfort").get<double>()) + ", consumption " +
         io::num(c.at("chosen").at("consumption").get<double>()) + "\n";
  out += "savings " + io::num(100.0 * c.at("savings").get<double>()) + " %" +
         (c.at("fallback").get<bool>() ? " (no member within the comfort tolerance)" : "") + "\n";
}

}  // namespace detail

// Text summary of every training, calibration and optimization result found
// under `dir`, in path order.
inline std::string report_text(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("'" + dir + "' is not a directory");
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name == "metrics.json" || name == "calibration.json" || name == "chosen.json")
      files.push_back(fs::relative(e.path(), dir).generic_string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) return "nothing to report in " + dir + "\n";
  std::string out;
  for (const auto& f : files) {
    const json j = io::read_json((fs::path(dir) / f).string());
    try {
      const auto name = fs::path(f).filename().string();
      if (name == "metrics.json") detail::training_block(out, f, j);
      else if (name == "calibration.json") detail::calibration_block(out, f, j);
      else detail::optimization_block(out, f, j);
    } catch (const json::exception& e) {
      throw InputError("'" + f + "' is not a bemopt result: " + e.what());
    }
    out += "\n";
  }
  return out;
}

}  // namespace bemopt::pipeline
