#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "bemopt/pipeline.hpp"

using namespace bemopt;
using namespace bemopt::pipeline;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kInput = 3, kNumerical = 4 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Building-energy metamodel toolkit: sample, train, calibrate, optimize, twin, report"};
  app.require_subcommand(1);
  app.set_version_flag("--version", BEMOPT_VERSION);

  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string config;
  app.add_option("--seed", seed, "Seed of every random stream")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--config", config, "JSON settings file")->check(CLI::ExistingFile);

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Sample scenarios and label them with the simulator");
  sample->add_option("--schema", sa.schema, "Schema file (default: built-in ranges)")->check(CLI::ExistingFile);
  sample->add_option("--weather", sa.weather, "Weather CSV or directory (default: synthetic pool)")
      ->check(CLI::ExistingPath);
  sample->add_option("-n,--examples", sa.examples, "Number of weeks")->capture_default_str();
  sample->add_option("--out", sa.out, "Dataset directory")->required();

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "Train a metamodel on a dataset");
  trainc->add_option("--dataset", ta.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  trainc->add_option("--model", ta.kind, "transformer or ffn")->check(CLI::IsMember({"transformer", "ffn"}));
  trainc->add_option("--epochs", ta.epochs, "Training epochs");
  trainc->add_option("--batch", ta.batch, "Minibatch size")->check(CLI::PositiveNumber);
  trainc->add_option("--out", ta.out, "Run directory")->required();
  bool verbose = false;
  trainc->add_flag("-v,--verbose", verbose, "Print one line per epoch");

  TwinArgs wa;
  auto* twin = app.add_subcommand("twin", "Fabricate a noisy sensor trace from the simulator");
  twin->add_option("--scenario", wa.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  twin->add_option("--weather", wa.weather, "Weather CSV or directory")->required()->check(CLI::ExistingPath);
  twin->add_option("--week", wa.week, "Week index in the weather file")->capture_default_str();
  twin->add_option("--sigma-t", wa.sigma_t, "Temperature noise, degC");
  twin->add_option("--sigma-q", wa.sigma_q, "Relative consumption noise");
  twin->add_option("--out", wa.out, "Output directory")->required();

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Fit scenario inputs to sensor traces with the metamodel frozen");
  cal->add_option("--model", ca.model, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  cal->add_option("--traces", ca.traces, "Trace CSV files (hour,t_int,q_heat)")->required()->check(CLI::ExistingFile);
  cal->add_option("--weather", ca.weather, "Weather CSV or directory")->required()->check(CLI::ExistingPath);
  cal->add_option("--weeks", ca.weeks, "Weather week of each trace (default 0, 1, ...)");
  cal->add_option("--scenario", ca.scenario, "Scenario JSON holding the fixed inputs")->required()->check(CLI::ExistingFile);
  cal->add_option("--space", ca.space, "JSON listing the free variables (default: building parameters)")
      ->check(CLI::ExistingFile);
  cal->add_option("--holdout-trace", ca.holdout_trace, "Held-out trace CSV")->check(CLI::ExistingFile);
  cal->add_option("--holdout-week", ca.holdout_week, "Weather week of the held-out trace")->capture_default_str();
  cal->add_option("--budget", ca.budget, "CMA-ES generations");
  cal->add_option("--out", ca.out, "Output directory")->required();

  OptimizeArgs oa;
  auto* optc = app.add_subcommand("optimize", "Search BMS settings for the comfort/consumption front");
  optc->add_option("--model", oa.model, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  optc->add_option("--calibrated", oa.calibrated, "Calibration report or scenario JSON")
      ->required()
      ->check(CLI::ExistingFile);
  optc->add_option("--weather", oa.weather, "Weather CSV or directory")->required()->check(CLI::ExistingPath);
  optc->add_option("--week", oa.week, "Week index in the weather file")->capture_default_str();
  optc->add_option("--generations", oa.generations, "NSGA-II generations");
  optc->add_option("--pop", oa.population, "Population size (even)");
  optc->add_option("--out", oa.out, "Output directory")->required();

  std::string report_dir, report_out;
  auto* rep = app.add_subcommand("report", "Summarize the results under a directory");
  rep->add_option("dir", report_dir, "Run directory")->required();
  rep->add_option("--out", report_out, "Also write the summary to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    Context ctx;
    ctx.seed = seed;
    ctx.jobs = jobs;
    ctx.config_path = config;
    if (!config.empty()) ctx.settings = load_settings(config);

    if (*sample) {
      cmd_sample(sa, ctx);
    } else if (*trainc) {
      auto log = [&](const train::EpochRecord& r) {
        if (!verbose) return;
        std::printf("epoch %zu train %.6g val %.6g R2_T %.4f R2_Q %.4f\n", r.epoch, r.train_loss,
                    r.validation.loss.mean, r.validation.r2_t.mean, r.validation.r2_q.mean);
        std::fflush(stdout);
      };
      const auto s = cmd_train(ta, ctx, log);
      std::printf("best epoch %zu: validation R2_T %.4f R2_Q %.4f\n", s.result.best_epoch, s.validation.r2_t.mean,
                  s.validation.r2_q.mean);
    } else if (*twin) {
      cmd_twin(wa, ctx);
    } else if (*cal) {
      const auto s = cmd_calibrate(ca, ctx);
      std::printf("calibration cost %.6g -> %.6g\n", s.result.initial_cost, s.result.best_cost);
      if (s.holdout)
        std::printf("held-out week: R2_T %.4f R2_Q %.4f\n", s.holdout->metrics.r2_t, s.holdout->metrics.r2_q);
    } else if (*optc) {
      const auto r = cmd_optimize(oa, ctx);
      std::printf("front of %zu, savings %.2f %%%s\n", r.front.members.size(), 100.0 * r.chosen.savings,
                  r.chosen.fallback ? " (fallback)" : "");
    } else if (*rep) {
      const std::string text = report_text(report_dir);
      std::fputs(text.c_str(), stdout);
      if (!report_out.empty()) io::write_file(report_out, text);
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const Error& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  }
  return kOk;
}
