// Acceptance run: one PASS/FAIL line per criterion. Arguments select a subset
// ("acceptance 1 4 5"); criteria 6 and 7 reuse the model trained for 3.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <thread>

#include "bemopt/ad/gradcheck.hpp"
#include "bemopt/pipeline.hpp"

using namespace bemopt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---- 1. gradient fidelity ----

Outcome gradient_fidelity() {
  model::MetamodelConfig cfg;
  cfg.d_emb = 8;
  cfg.heads = 2;
  cfg.key_dim = 4;
  cfg.value_dim = 4;
  cfg.layers = 1;
  cfg.window = 3;
  cfg.ffn_hidden = 16;
  model::Metamodel m = model::Metamodel::create(cfg, 101);
  Rng rng(102);
  ad::Tensor x({24, kInputChannels}), target({24, kOutputChannels});
  for (double& v : x.values()) v = rng.uniform();
  for (double& v : target.values()) v = rng.normal();
  train::AggregateWeights agg{};
  for (std::size_t c : kHeatAggregateChannels) agg[c] = 0.5;
  const auto params = m.parameters().pointers();
  const auto res = ad::grad_check(
      [&](ad::Graph& g) {
        return train::episode_loss(g, m.forward(g, g.constant(x)), g.constant(target), agg, train::LossWeights{});
      },
      params);
  return {res.max_relative_error < 1e-4 && res.checked == m.parameters().scalar_count(),
          "max relative error " + fmt("%.3g", res.max_relative_error) + " over " + std::to_string(res.checked) +
              " parameters (bound 1e-4)"};
}

// ---- 2. attention locality ----

double max_row_change(const ad::Tensor& a, const ad::Tensor& b, std::size_t row) {
  double d = 0;
  for (std::size_t c = 0; c < a.cols(); ++c) d = std::max(d, std::abs(a(row, c) - b(row, c)));
  return d;
}

Outcome attention_locality() {
  model::MetamodelConfig cfg;
  cfg.d_emb = 8;
  cfg.heads = 2;
  cfg.key_dim = 4;
  cfg.value_dim = 4;
  cfg.ffn_hidden = 16;
  cfg.window = 4;
  cfg.layers = 3;
  const model::Metamodel m = model::Metamodel::create(cfg, 201);
  const std::size_t seq = 64, k = 32;
  Rng rng(202);
  ad::Tensor x({seq, cfg.d_emb});
  for (double& v : x.values()) v = rng.uniform();

  auto encode = [&](const ad::Tensor& in, std::size_t layers) {
    ad::Graph g(false);
    ad::Var h = g.constant(in);
    for (std::size_t l = 0; l < layers; ++l) h = m.encoder_layer(g, l, h);
    return h.value();
  };
  double single_outside = 0, single_inside = 1e300, stack_outside = 0, stack_edge = 1e300;
  const ad::Tensor base1 = encode(x, 1), baseN = encode(x, cfg.layers);
  const std::size_t reach = cfg.layers * cfg.window;
  for (std::size_t p = 0; p < seq; ++p) {
    ad::Tensor y = x;
    for (std::size_t c = 0; c < cfg.d_emb; ++c) y(p, c) += 0.5;
    const double d1 = max_row_change(base1, encode(y, 1), k);
    const double dN = max_row_change(baseN, encode(y, cfg.layers), k);
    if (p + cfg.window < k || p > k + cfg.window) single_outside = std::max(single_outside, d1);
    else single_inside = std::min(single_inside, d1);
    if (p + reach < k || p > k + reach) stack_outside = std::max(stack_outside, dN);
    if (p + reach == k || p == k + reach) stack_edge = std::min(stack_edge, dN);
  }
  const bool pass = single_outside <= 1e-12 && stack_outside <= 1e-12 && single_inside > 0 && stack_edge > 0;
  return {pass, "one layer: change outside the window " + fmt("%.3g", single_outside) + ", inside >= " +
                    fmt("%.3g", single_inside) + "; " + std::to_string(cfg.layers) + " layers: outside N*window " +
                    fmt("%.3g", stack_outside) + " (bound 1e-12)"};
}

// ---- 3. training analogue ----

// Desk-scale architecture. The half-window of 28 h with two layers lets the
// full model see the whole 168 h week: the envelope mass remembers several
// days of weather, so shorter fields cannot recover the temperature level.
model::MetamodelConfig desk_config(model::ModelKind kind) {
  model::MetamodelConfig c;
  c.kind = kind;
  c.d_emb = 32;
  c.heads = 4;
  c.key_dim = 8;
  c.value_dim = 8;
  c.layers = 2;
  c.window = 28;
  c.ffn_hidden = 64;
  return c;
}

train::TrainConfig desk_training() {
  train::TrainConfig t;
  t.epochs = 75;
  t.batch = 16;
  t.adam.learning_rate = 2e-3;
  t.cosine_decay = true;
  t.seed = 301;
  t.jobs = worker_count();
  return t;
}

struct Trained {
  std::vector<WeatherSeries> pool;
  NormStats stats;
  std::optional<model::Metamodel> model;
};

Outcome training_analogue(Trained& out) {
  const auto t0 = Clock::now();
  out.pool = sim::synthesize_pool(64, 7);
  train::SampleOptions so;
  so.splits = {2000, 100, 0};
  so.seed = 302;
  so.jobs = worker_count();
  const train::Dataset ds = train::sample_dataset(default_schema(), out.pool, so);
  const auto training = ds.train_episodes();
  out.stats = fit_norm_stats(ds.schema, training);
  const auto tr = train::prepare(training, out.stats);
  const auto va = train::prepare(ds.validation_episodes(), out.stats);

  auto fit = [&](model::ModelKind kind) {
    model::Metamodel m = model::Metamodel::create(desk_config(kind), 303);
    const auto res = train::train(m, tr, va, out.stats, desk_training(), [&](const train::EpochRecord& r) {
      if (r.epoch % 10 != 0) return;
      std::fprintf(stderr, "  %s epoch %zu: validation loss %.4f R2_T %.3f R2_Q %.3f (%.0f s)\n",
                   model::to_string(kind).c_str(), r.epoch, r.validation.loss.mean, r.validation.r2_t.mean,
                   r.validation.r2_q.mean, seconds_since(t0));
    });
    const auto report = train::evaluate(m, va, out.stats, train::LossWeights{}, worker_count());
    return std::tuple{std::move(m), res, report};
  };
  auto [tf, tf_res, tf_rep] = fit(model::ModelKind::Transformer);
  auto [ffn, ffn_res, ffn_rep] = fit(model::ModelKind::Ffn);
  out.model = std::move(tf);
  const double elapsed = seconds_since(t0);

  const bool pass = tf_rep.r2_t.mean >= 0.90 && tf_rep.r2_q.mean >= 0.60 && tf_rep.loss.mean < ffn_rep.loss.mean &&
                    elapsed <= 1800;
  return {pass, "Transformer validation R2_T " + fmt("%.4f", tf_rep.r2_t.mean) + " (>= 0.90), R2_Q " +
                    fmt("%.4f", tf_rep.r2_q.mean) + " (>= 0.60), loss " + fmt("%.4f", tf_rep.loss.mean) +
                    " vs FFN " + fmt("%.4f", ffn_rep.loss.mean) + " (FFN R2_T " + fmt("%.4f", ffn_rep.r2_t.mean) +
                    "); best epochs " + std::to_string(tf_res.best_epoch) + "/" + std::to_string(ffn_res.best_epoch) +
                    "; " + fmt("%.0f", elapsed) + " s (<= 1800)"};
}

// ---- 4. CMA-ES benchmarks ----

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

Outcome cmaes_benchmarks() {
  auto options = [](std::size_t n, double start) {
    calib::CmaOptions o;
    o.initial_mean = calib::Vector::Constant(static_cast<Eigen::Index>(n), start);
    o.initial_sigma = 0.5;
    return o;
  };
  auto sphere = [](const calib::Vector& x) { return x.squaredNorm(); };
  auto rosenbrock = [](const calib::Vector& x) {
    double f = 0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
      f += 100 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1 - x[i], 2);
    return f;
  };
  const auto s = calib::cma_minimize(sphere, options(10, 1.0), 401, 100000, 5000, 1e-10);
  const auto r = calib::cma_minimize(rosenbrock, options(5, 0.0), 402, 100000, 50000, 1e-6);
  const bool pass = s.best_fitness < 1e-10 && s.evaluations <= 5000 && r.best_fitness < 1e-6 &&
                    r.evaluations <= 50000 && non_increasing(s.best_history) && non_increasing(r.best_history);
  return {pass, "sphere n=10 " + fmt("%.3g", s.best_fitness) + " in " + std::to_string(s.evaluations) +
                    " evaluations (< 1e-10 within 5000); Rosenbrock n=5 " + fmt("%.3g", r.best_fitness) + " in " +
                    std::to_string(r.evaluations) + " (< 1e-6 within 50000); best-so-far monotone " +
                    (non_increasing(s.best_history) && non_increasing(r.best_history) ? "yes" : "no")};
}

// ---- 5. NSGA-II on ZDT1 ----

Outcome nsga_zdt1() {
  auto zdt1 = [](const std::vector<double>& x) {
    double g = 0;
    for (std::size_t i = 1; i < x.size(); ++i) g += x[i];
    g = 1 + 9 * g / static_cast<double>(x.size() - 1);
    return opt::Objectives{x[0], g * (1 - std::sqrt(x[0] / g))};
  };
  opt::NsgaConfig cfg;
  cfg.population = 100;
  cfg.generations = 250;
  const auto front = opt::nsga2_run(cfg, zdt1, std::vector<double>(30, 0.0), std::vector<double>(30, 1.0), 501);

  bool mutual = true;
  for (const auto& a : front.members)
    for (const auto& b : front.members) mutual = mutual && !opt::dominates(a.f, b.f);
  // Distance to the analytic front f2 = 1 - sqrt(f1), f1 in [0, 1], on a fine grid.
  double total = 0;
  for (const auto& m : front.members) {
    double best = 1e300;
    for (int i = 0; i <= 100000; ++i) {
      const double f1 = i / 100000.0;
      best = std::min(best, std::hypot(m.f[0] - f1, m.f[1] - (1 - std::sqrt(f1))));
    }
    total += best;
  }
  const double mean = total / static_cast<double>(front.members.size());
  return {mutual && mean < 0.01, std::to_string(front.members.size()) + " members, mutually non-dominated " +
                                     (mutual ? "yes" : "no") + ", mean distance to the analytic front " +
                                     fmt("%.3g", mean) + " (< 0.01)"};
}

// ---- 6. digital-twin calibration ----

// The building behind the synthetic sensors.
Scenario planted_scenario() {
  Scenario s;
  s.building.airchange_infiltration = 0.2;
  s.building.capacitance = 220;
  s.building.power_heat_kw = 800;
  s.building.power_clim_kw = 500;
  s.building.nb_occupants = 1600;
  s.building.nb_pcs = 1400;
  s.building.percent_light_night = 30;
  s.building.percent_pcs_night = 10;
  s.building.facade_thickness = {0.15, 0.1, 0.05, 0.15};
  s.building.roof_thickness = 0.15;
  s.building.window_percent = {40, 50, 45, 45};
  s.bms = BmsSchedule::uniform({8, 19, 28, 24, 7, 18, 18, 22, 8, 19, 19, 1.0});
  s.occupancy.max_occupants = s.building.nb_occupants;
  return s;
}

constexpr std::size_t kCalibrationWeeks[] = {8, 43};
constexpr std::size_t kHeldOutWeek = 51;

Outcome twin_calibration(Trained& t) {
  if (!t.model) return {false, "no trained metamodel"};
  const auto t0 = Clock::now();
  const Scenario planted = planted_scenario();
  const sim::RcModelConfig rc;
  std::vector<calib::CalibrationWeek> weeks;
  std::uint64_t noise_seed = 601;
  for (std::size_t w : kCalibrationWeeks)
    weeks.push_back({t.pool[w], pipeline::twin_trace(planted, t.pool[w], rc, 0.1, 0.02, noise_seed++)});
  const calib::CalibrationWeek held{t.pool[kHeldOutWeek],
                                    pipeline::twin_trace(planted, t.pool[kHeldOutWeek], rc, 0.1, 0.02, noise_seed)};

  calib::CalibrationSpace space;
  space.free = pipeline::building_variables();
  space.fixed = planted;
  space.fixed.building = BuildingParams{};
  calib::CalibrationOptions co;
  co.generations = 500;
  co.seed = 602;
  co.jobs = worker_count();
  const auto res = calib::calibrate(*t.model, t.stats, default_schema(), space, weeks, co);
  const auto report = calib::week_report(*t.model, t.stats, res.best, held);
  const double elapsed = seconds_since(t0);

  const bool pass = report.metrics.r2_t >= 0.90 && report.metrics.r2_q >= 0.80 && res.best_cost < res.initial_cost &&
                    res.checksum_before == res.checksum_after && elapsed <= 1200;
  return {pass, "held-out week R2_T " + fmt("%.4f", report.metrics.r2_t) + " (>= 0.90), R2_Q " +
                    fmt("%.4f", report.metrics.r2_q) + " (>= 0.80); cost " + fmt("%.4f", res.initial_cost) + " -> " +
                    fmt("%.4f", res.best_cost) + "; weights unchanged " +
                    (res.checksum_before == res.checksum_after ? "yes" : "no") + "; " + fmt("%.0f", elapsed) +
                    " s (<= 1200)"};
}

// ---- 7. end-to-end optimization ----

constexpr std::size_t kOptimizationWeek = 8;

Scenario wasteful_scenario() {
  Scenario s = planted_scenario();
  s.occupancy.start.fill(8);
  s.occupancy.end.fill(17);
  s.bms.start_heat.fill(7);
  s.bms.end_heat.fill(18);
  s.bms.t_heat_conf.fill(24);
  return s;
}

// Best oracle savings over a small grid of uniform schedules whose comfort gap
// stays within `tolerance` of the baseline.
double grid_savings(const Scenario& base, const WeatherSeries& w, double tolerance) {
  const sim::RcModelConfig rc;
  const auto b = opt::simulated_objectives(sim::simulate_settled_week(base, w, rc), base.occupancy);
  double best = 0;
  for (double start : {7.0, 8.0})
    for (double end : {17.0, 18.0})
      for (double conf = 22; conf <= 24; conf += 0.5)
        for (double red : {17.0, 18.0, 20.0})
          for (double vol : {0.7, 1.0}) {
            Scenario x = base;
            x.bms.start_heat.fill(start);
            x.bms.end_heat.fill(end);
            x.bms.t_heat_conf.fill(conf);
            x.bms.t_heat_red.fill(red);
            x.bms.vol_ventilation.fill(vol);
            const auto o = opt::simulated_objectives(sim::simulate_settled_week(x, w, rc), x.occupancy);
            if (o[0] <= b[0] + tolerance) best = std::max(best, 1 - o[1] / b[1]);
          }
  return best;
}

Outcome end_to_end_optimization(Trained& t) {
  if (!t.model) return {false, "no trained metamodel"};
  const auto t0 = Clock::now();
  const Scenario base = wasteful_scenario();
  const WeatherSeries& w = t.pool[kOptimizationWeek];
  const double floor = grid_savings(base, w, 0.05);

  const Schema schema = default_schema();
  opt::BmsProblem problem;
  problem.model = &*t.model;
  problem.stats = &t.stats;
  problem.schema = &schema;
  problem.base = base;
  problem.weather = w;
  opt::NsgaConfig cfg;
  cfg.population = 100;
  cfg.generations = 300;
  const auto r = opt::optimize_bms(problem, cfg, 701, worker_count(), 0.05);

  const sim::RcModelConfig rc;
  const auto ob = opt::simulated_objectives(sim::simulate_settled_week(base, w, rc), base.occupancy);
  const auto oc = opt::simulated_objectives(sim::simulate_settled_week(r.chosen_scenario, w, rc), base.occupancy);
  const double savings = 1 - oc[1] / ob[1];
  const double elapsed = seconds_since(t0);
  const bool pass = floor >= 0.05 && !r.chosen.fallback && savings >= 0.05 && oc[0] <= ob[0] + 0.05 && elapsed <= 900;
  return {pass, "oracle grid floor " + fmt("%.2f", 100 * floor) + " %; chosen point: metamodel savings " +
                    fmt("%.2f", 100 * r.chosen.savings) + " %, oracle savings " + fmt("%.2f", 100 * savings) +
                    " % (>= 5), oracle comfort " + fmt("%.4f", oc[0]) + " vs baseline " + fmt("%.4f", ob[0]) +
                    " (+0.05 allowed)" + (r.chosen.fallback ? ", fallback" : "") + "; " + fmt("%.0f", elapsed) +
                    " s (<= 900)"};
}

// ---- 8. reproducibility ----

std::map<std::string, std::string> artifacts(const std::string& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "run_manifest.json")
      out[fs::relative(e.path(), dir).generic_string()] = io::read_file(e.path().string());
  return out;
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "bemopt_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = BEMOPT_CLI;
  io::write_json((root / "planted.json").string(), io::to_json(planted_scenario()));
  io::write_json((root / "smoke.json").string(),
                 io::json::parse(R"({"sample": {"weather_weeks": 4},
                   "model": {"d_emb": 8, "heads": 2, "layers": 1, "ffn_hidden": 16, "window": 6},
                   "train": {"epochs": 2, "batch": 4}, "calibrate": {"generations": 5},
                   "optimize": {"population": 12, "generations": 4}})"));

  std::vector<std::string> commands = {
      "--seed 1 --config ../smoke.json sample -n 24 --out data",
      "--seed 2 --config ../smoke.json train --dataset data --out train",
      "--seed 3 twin --scenario ../planted.json --weather data/weather.csv --week 0 --out twin0",
      "--seed 4 twin --scenario ../planted.json --weather data/weather.csv --week 1 --out twin1",
      "--seed 5 --config ../smoke.json calibrate --model train/model --traces twin0/trace.csv --weather "
      "data/weather.csv --scenario ../planted.json --holdout-trace twin1/trace.csv --holdout-week 1 --out calibrate",
      "--seed 6 --config ../smoke.json optimize --model train/model --calibrated calibrate/calibration.json "
      "--weather data/weather.csv --out optimize",
      "report . --out report.txt"};
  for (const char* run : {"a", "b"}) {
    fs::create_directories(root / run);
    for (const auto& c : commands) {
      const std::string line = "cd '" + (root / run).string() + "' && '" + cli + "' " + c + " > /dev/null";
      if (std::system(line.c_str()) != 0) return {false, "command failed: bemopt " + c};
    }
  }
  const auto a = artifacts((root / "a").string()), b = artifacts((root / "b").string());
  std::size_t same = 0;
  std::string differing;
  for (const auto& [name, bytes] : a) {
    if (b.count(name) && b.at(name) == bytes) ++same;
    else differing += " " + name;
  }
  const bool pass = a.size() == b.size() && same == a.size() && a.count("report.txt");
  fs::remove_all(root);
  return {pass, std::to_string(same) + " of " + std::to_string(a.size()) + " artifacts byte-identical across two runs of " +
                    std::to_string(commands.size()) + " commands" + (differing.empty() ? "" : "; differing:" + differing)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int c) { return selected.empty() || selected.count(c); };

  Trained trained;
  const std::vector<std::pair<int, std::pair<std::string, std::function<Outcome()>>>> criteria = {
      {1, {"gradient fidelity", gradient_fidelity}},
      {2, {"attention locality", attention_locality}},
      {3, {"training analogue", [&] { return training_analogue(trained); }}},
      {4, {"CMA-ES benchmarks", cmaes_benchmarks}},
      {5, {"NSGA-II ZDT1", nsga_zdt1}},
      {6, {"digital-twin calibration", [&] { return twin_calibration(trained); }}},
      {7, {"end-to-end optimization", [&] { return end_to_end_optimization(trained); }}},
      {8, {"reproducibility", reproducibility}}};

  const bool need_model = wanted(3) || wanted(6) || wanted(7);
  int failed = 0;
  for (const auto& [id, c] : criteria) {
    const bool run_for_model = id == 3 && need_model;
    if (!wanted(id) && !run_for_model) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!wanted(id)) continue;
    std::printf("[%s] criterion %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, c.first.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
