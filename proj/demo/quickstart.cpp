// Smoke-scale walk through the whole pipeline: sample a dataset, train a small
// Transformer, fabricate sensor traces for a planted building, calibrate the
// building against them, then search the BMS settings and print the report.
#include <cstdio>
#include <filesystem>

#include "bemopt/pipeline.hpp"

using namespace bemopt;
using namespace bemopt::pipeline;

int main(int argc, char** argv) {
  const std::string root = argc > 1 ? argv[1] : "bemopt_quickstart";
  std::filesystem::create_directories(root);
  try {
    Context ctx;
    ctx.seed = 2024;
    ctx.settings = settings_from_json(io::json::parse(R"({
      "sample": {"weather_weeks": 8},
      "model": {"d_emb": 16, "heads": 2, "layers": 1, "ffn_hidden": 32, "window": 12},
      "train": {"epochs": 8, "batch": 8, "learning_rate": 0.003, "cosine_decay": true},
      "calibrate": {"generations": 40},
      "optimize": {"population": 24, "generations": 20}})"));

    std::puts("sampling 200 weeks");
    cmd_sample({"", "", 200, root + "/data"}, ctx);

    std::puts("training");
    TrainArgs ta;
    ta.dataset = root + "/data";
    ta.out = root + "/train";
    cmd_train(ta, ctx, [](const train::EpochRecord& r) {
      std::printf("  epoch %zu validation loss %.4f R2_T %.3f R2_Q %.3f\n", r.epoch, r.validation.loss.mean,
                  r.validation.r2_t.mean, r.validation.r2_q.mean);
    });

    // The planted building: a heavier, better insulated variant of the default.
    Scenario planted;
    planted.building.capacitance = 220;
    planted.building.airchange_infiltration = 0.2;
    planted.building.facade_thickness = {0.15, 0.15, 0.1, 0.1};
    planted.bms = BmsSchedule::uniform({8, 19, 28, 24, 7, 18, 18, 22, 8, 19, 19, 1.0});
    io::write_json(root + "/planted.json", io::to_json(planted));
    Scenario prior = planted;
    prior.building = BuildingParams{};
    io::write_json(root + "/prior.json", io::to_json(prior));

    std::puts("fabricating sensor traces");
    for (std::size_t week : {0, 1}) {
      TwinArgs wa;
      wa.scenario = root + "/planted.json";
      wa.weather = root + "/data/weather.csv";
      wa.week = week;
      wa.out = root + "/twin" + std::to_string(week);
      cmd_twin(wa, ctx);
    }

    std::puts("calibrating");
    CalibrateArgs ca;
    ca.model = root + "/train/model";
    ca.traces = {root + "/twin0/trace.csv"};
    ca.weather = root + "/data/weather.csv";
    ca.scenario = root + "/prior.json";
    ca.holdout_trace = root + "/twin1/trace.csv";
    ca.holdout_week = 1;
    ca.out = root + "/calibrate";
    cmd_calibrate(ca, ctx);

    std::puts("optimizing");
    OptimizeArgs oa;
    oa.model = root + "/train/model";
    oa.calibrated = root + "/calibrate/calibration.json";
    oa.weather = root + "/data/weather.csv";
    oa.out = root + "/optimize";
    cmd_optimize(oa, ctx);

    std::printf("\n%s", report_text(root).c_str());
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
