#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bemopt/ad/checkpoint.hpp"
#include "bemopt/calib/calibrate.hpp"
#include "bemopt/model/metamodel.hpp"
#include "bemopt/sim/rc_model.hpp"
#include "bemopt/train/dataset.hpp"

namespace bemopt::io {

using nlohmann::json;

// Shortest text that reads back to the same double.
inline std::string num(double v) {
  char buf[32];
  for (int p = 15; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path + "'");
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

// Comma-separated rows; blank lines skipped.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& what) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw InputError(what + ": empty CSV");
  return rows;
}

inline double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InputError(where + ": '" + s + "' is not a number");
  }
  if (used != s.size() && s.find_first_not_of(" \t", used) != std::string::npos)
    throw InputError(where + ": '" + s + "' is not a number");
  return v;
}

// Column index of every expected header name.
inline std::vector<std::size_t> header_columns(const std::vector<std::string>& header,
                                               const std::vector<std::string>& names, const std::string& what) {
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    auto it = std::find(header.begin(), header.end(), n);
    if (it == header.end()) throw InputError(what + ": missing column '" + n + "'");
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  return cols;
}

// ---- scenarios ----

inline json to_json(const Scenario& s) {
  json b = json::object(), i = json::object(), o = json::object();
  for (std::size_t k = 0; k < BuildingParams::kCount; ++k) b[std::string(BuildingParams::names()[k])] = s.building[k];
  for (std::size_t k = 0; k < BmsSchedule::kCount; ++k) i[std::string(BmsSchedule::names()[k])] = s.bms[k];
  for (std::size_t k = 0; k < OccupancySchedule::kCount; ++k)
    o[std::string(OccupancySchedule::names()[k])] = s.occupancy[k];
  return {{"building", b}, {"bms", i}, {"occupancy", o}};
}

// Every variable must be present; a BMS entry is either one number (all days)
// or seven.
inline Scenario scenario_from_json(const json& j) {
  Scenario s;
  auto section = [&](const char* key) -> const json& {
    if (!j.contains(key) || !j.at(key).is_object()) throw InputError(std::string("scenario: missing object '") + key + "'");
    return j.at(key);
  };
  auto number = [](const json& v, const std::string& name) {
    if (!v.is_number()) throw InputError("scenario: '" + name + "' must be a number");
    return v.get<double>();
  };
  auto check_keys = [](const json& obj, auto names, const char* key) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (std::find(names.begin(), names.end(), it.key()) == names.end())
        throw InputError(std::string("scenario: unknown variable '") + it.key() + "' in '" + key + "'");
  };
  const json& b = section("building");
  check_keys(b, BuildingParams::names(), "building");
  for (std::size_t k = 0; k < BuildingParams::kCount; ++k) {
    const std::string n(BuildingParams::names()[k]);
    if (!b.contains(n)) throw InputError("scenario: missing building variable '" + n + "'");
    s.building[k] = number(b.at(n), n);
  }
  const json& i = section("bms");
  check_keys(i, BmsSchedule::names(), "bms");
  for (std::size_t k = 0; k < BmsSchedule::kCount; ++k) {
    const std::string n(BmsSchedule::names()[k]);
    if (!i.contains(n)) throw InputError("scenario: missing BMS variable '" + n + "'");
    const json& v = i.at(n);
    if (v.is_number()) {
      s.bms[k].fill(v.get<double>());
    } else if (v.is_array() && v.size() == kDaysPerWeek) {
      for (std::size_t d = 0; d < kDaysPerWeek; ++d) s.bms[k][d] = number(v[d], n);
    } else {
      throw InputError("scenario: BMS variable '" + n + "' needs one number or an array of 7");
    }
  }
  const json& o = section("occupancy");
  check_keys(o, OccupancySchedule::names(), "occupancy");
  for (std::size_t k = 0; k < OccupancySchedule::kCount; ++k) {
    const std::string n(OccupancySchedule::names()[k]);
    if (!o.contains(n)) throw InputError("scenario: missing occupancy variable '" + n + "'");
    s.occupancy[k] = number(o.at(n), n);
  }
  s.occupancy.max_occupants = s.building.nb_occupants;
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  try {
    return scenario_from_json(read_json(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// ---- weather ----

inline std::string weather_csv(const std::vector<WeatherSeries>& weeks) {
  std::string out = "week,hour";
  for (auto n : WeatherRecord::names()) (out += ',') += n;
  out += '\n';
  for (std::size_t w = 0; w < weeks.size(); ++w)
    for (std::size_t h = 0; h < kHoursPerWeek; ++h) {
      out += std::to_string(w) + ',' + std::to_string(h);
      for (std::size_t c = 0; c < WeatherRecord::kCount; ++c) (out += ',') += num(weeks[w][h][c]);
      out += '\n';
    }
  return out;
}

// Weather CSV with columns DNI..TAMB; an optional `week` column splits the
// rows into consecutive weeks of 168 hours.
inline std::vector<WeatherSeries> parse_weather_csv(const std::string& text, const std::string& what) {
  const auto rows = parse_csv(text, what);
  std::vector<std::string> names(WeatherRecord::names().begin(), WeatherRecord::names().end());
  const auto cols = header_columns(rows[0], names, what);
  const auto week_it = std::find(rows[0].begin(), rows[0].end(), "week");
  const bool has_week = week_it != rows[0].end();
  const std::size_t week_col = static_cast<std::size_t>(week_it - rows[0].begin());
  std::vector<std::vector<WeatherRecord>> weeks;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = what + " line " + std::to_string(r + 1);
    if (rows[r].size() != rows[0].size()) throw InputError(where + ": expected " + std::to_string(rows[0].size()) + " cells");
    std::size_t w = (r - 1) / kHoursPerWeek;
    if (has_week) {
      const double wv = parse_number(rows[r][week_col], where);
      if (wv < 0 || wv != std::floor(wv)) throw InputError(where + ": bad week index");
      w = static_cast<std::size_t>(wv);
      if (w != weeks.size() && w + 1 != weeks.size()) throw InputError(where + ": weeks must be consecutive");
    }
    if (w >= weeks.size()) weeks.emplace_back();
    WeatherRecord rec;
    for (std::size_t c = 0; c < cols.size(); ++c) rec[c] = parse_number(rows[r][cols[c]], where);
    weeks[w].push_back(rec);
  }
  std::vector<WeatherSeries> out;
  for (std::size_t w = 0; w < weeks.size(); ++w) {
    try {
      out.emplace_back(std::move(weeks[w]));
    } catch (const InputError& e) {
      throw InputError(what + " week " + std::to_string(w) + ": " + e.what());
    }
  }
  if (out.empty()) throw InputError(what + ": no weather rows");
  return out;
}

inline std::vector<WeatherSeries> load_weather(const std::string& path) { return parse_weather_csv(read_file(path), path); }

// Every *.csv in a directory, in name order.
inline std::vector<WeatherSeries> load_weather_dir(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<WeatherSeries> pool;
  for (const auto& f : files) {
    auto weeks = load_weather(f.string());
    pool.insert(pool.end(), weeks.begin(), weeks.end());
  }
  if (pool.empty()) throw InputError("no weather CSV files in '" + dir + "'");
  return pool;
}

// ---- sensor traces ----

inline std::string trace_csv(const calib::SensorTrace& t) {
  std::string out = "hour,t_int,q_heat\n";
  for (std::size_t h = 0; h < t.t_int.size(); ++h) out += std::to_string(h) + ',' + num(t.t_int[h]) + ',' + num(t.q_heat[h]) + '\n';
  return out;
}

inline calib::SensorTrace parse_trace_csv(const std::string& text, const std::string& what) {
  const auto rows = parse_csv(text, what);
  const auto cols = header_columns(rows[0], {"hour", "t_int", "q_heat"}, what);
  calib::SensorTrace t;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = what + " line " + std::to_string(r + 1);
    if (rows[r].size() != rows[0].size()) throw InputError(where + ": expected " + std::to_string(rows[0].size()) + " cells");
    if (parse_number(rows[r][cols[0]], where) != static_cast<double>(r - 1))
      throw InputError(where + ": hours must run 0, 1, 2, ...");
    t.t_int.push_back(parse_number(rows[r][cols[1]], where));
    t.q_heat.push_back(parse_number(rows[r][cols[2]], where));
  }
  try {
    t.validate();
  } catch (const InputError& e) {
    throw InputError(what + ": " + e.what());
  }
  return t;
}

inline calib::SensorTrace load_trace(const std::string& path) { return parse_trace_csv(read_file(path), path); }

// ---- simulator outputs ----

inline std::string outputs_csv(const std::vector<const SimOutput*>& outs) {
  std::string s = "index,hour";
  for (auto n : output_names()) (s += ',') += n;
  s += '\n';
  for (std::size_t i = 0; i < outs.size(); ++i)
    for (std::size_t h = 0; h < outs[i]->hours.size(); ++h) {
      s += std::to_string(i) + ',' + std::to_string(h);
      for (std::size_t c = 0; c < kOutputChannels; ++c) (s += ',') += num(outs[i]->hours[h][c]);
      s += '\n';
    }
  return s;
}

// ---- normalization ----

inline json to_json(const NormStats& st) {
  std::vector<int> flagged(st.input_flagged.begin(), st.input_flagged.end());
  return {{"input_lo", st.input_lo},         {"input_hi", st.input_hi},         {"input_flagged", flagged},
          {"target_mean", st.target_mean},   {"target_std", st.target_std},     {"aggregate_mean", st.aggregate_mean},
          {"aggregate_std", st.aggregate_std}};
}

inline NormStats norm_stats_from_json(const json& j) {
  NormStats st;
  st.input_lo = j.at("input_lo").get<std::vector<double>>();
  st.input_hi = j.at("input_hi").get<std::vector<double>>();
  for (int f : j.at("input_flagged").get<std::vector<int>>()) st.input_flagged.push_back(f != 0);
  st.target_mean = j.at("target_mean").get<std::array<double, kOutputChannels>>();
  st.target_std = j.at("target_std").get<std::array<double, kOutputChannels>>();
  st.aggregate_mean = j.at("aggregate_mean").get<double>();
  st.aggregate_std = j.at("aggregate_std").get<double>();
  if (st.input_lo.size() != kInputChannels || st.input_hi.size() != kInputChannels ||
      st.input_flagged.size() != kInputChannels)
    throw InputError("normalization statistics must cover " + std::to_string(kInputChannels) + " input channels");
  return st;
}

// ---- model checkpoints: <dir>/model.json + <dir>/model.bin ----

struct Checkpoint {
  model::Metamodel model;
  NormStats stats;
  json extra = json::object();
};

inline void save_checkpoint(const std::string& dir, const model::Metamodel& m, const NormStats& stats,
                            const json& extra = json::object()) {
  std::filesystem::create_directories(dir);
  std::vector<ad::NamedTensor> tensors;
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    tensors.push_back({m.parameters()[i].name, m.parameters()[i].value});
  const json index = ad::write_tensors(dir + "/model.bin", tensors);
  write_json(dir + "/model.json",
             {{"format", "bemopt-model 1"}, {"config", model::to_json(m.config())}, {"norm", to_json(stats)},
              {"tensors", index}, {"extra", extra}});
}

inline Checkpoint load_checkpoint(const std::string& dir) {
  const json j = read_json(dir + "/model.json");
  if (j.value("format", "") != "bemopt-model 1") throw InputError(dir + "/model.json: not a bemopt model checkpoint");
  const auto cfg = model::config_from_json(j.at("config"));
  model::ParameterSet ps;
  for (auto& nt : ad::read_tensors(dir + "/model.bin", j.at("tensors"))) {
    auto& p = ps.add_constant(nt.name, nt.tensor.shape(), 0.0);
    p.value = std::move(nt.tensor);
  }
  Checkpoint c{model::Metamodel::from_parameters(cfg, std::move(ps)), norm_stats_from_json(j.at("norm")),
               j.value("extra", json::object())};
  return c;
}

// ---- datasets: manifest.json, episodes.csv, weather.csv, targets.csv ----

inline std::vector<std::string> scenario_columns() {
  std::vector<std::string> cols;
  for (auto n : BuildingParams::names()) cols.emplace_back(n);
  for (const auto& r : bms_variables()) cols.push_back(r.label());
  for (auto n : OccupancySchedule::names()) cols.emplace_back(n);
  return cols;
}

inline std::vector<double> scenario_row(const Scenario& s) {
  std::vector<double> v;
  for (std::size_t k = 0; k < BuildingParams::kCount; ++k) v.push_back(s.building[k]);
  for (const auto& r : bms_variables()) v.push_back(variable(s, r));
  for (std::size_t k = 0; k < OccupancySchedule::kCount; ++k) v.push_back(s.occupancy[k]);
  return v;
}

inline const char* split_name(const train::SplitSizes& s, std::size_t i) {
  return i < s.train ? "train" : i < s.train + s.validation ? "validation" : "test";
}

inline void save_dataset(const std::string& dir, const train::Dataset& ds, const json& extra = json::object()) {
  std::filesystem::create_directories(dir);
  std::string ep = "index,split,weather";
  for (const auto& c : scenario_columns()) (ep += ',') += c;
  ep += '\n';
  std::vector<const SimOutput*> outs;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    ep += std::to_string(i) + ',' + split_name(ds.splits, i) + ',' + std::to_string(r.weather_index);
    for (double v : scenario_row(r.scenario)) (ep += ',') += num(v);
    ep += '\n';
    outs.push_back(&r.output);
  }
  write_file(dir + "/schema.txt", ds.schema.to_text());
  write_file(dir + "/episodes.csv", ep);
  write_file(dir + "/weather.csv", weather_csv(ds.weather_pool));
  write_file(dir + "/targets.csv", outputs_csv(outs));
  json m = {{"format", "bemopt-dataset 1"},
            {"seed", ds.seed},
            {"examples", ds.records.size()},
            {"splits", {{"train", ds.splits.train}, {"validation", ds.splits.validation}, {"test", ds.splits.test}}},
            {"weather_weeks", ds.weather_pool.size()},
            {"extra", extra}};
  write_json(dir + "/manifest.json", m);
}

inline train::Dataset load_dataset(const std::string& dir) {
  const json m = read_json(dir + "/manifest.json");
  if (m.value("format", "") != "bemopt-dataset 1") throw InputError(dir + "/manifest.json: not a bemopt dataset");
  train::Dataset ds;
  ds.seed = m.at("seed").get<std::uint64_t>();
  ds.splits.train = m.at("splits").at("train").get<std::size_t>();
  ds.splits.validation = m.at("splits").at("validation").get<std::size_t>();
  ds.splits.test = m.at("splits").at("test").get<std::size_t>();
  ds.schema = Schema::load(dir + "/schema.txt");
  ds.weather_pool = load_weather(dir + "/weather.csv");

  const std::string ep_path = dir + "/episodes.csv";
  const auto rows = parse_csv(read_file(ep_path), ep_path);
  auto names = scenario_columns();
  names.insert(names.begin(), {"index", "split", "weather"});
  const auto cols = header_columns(rows[0], names, ep_path);
  const auto refs = bms_variables();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = ep_path + " line " + std::to_string(r + 1);
    if (rows[r].size() != rows[0].size()) throw InputError(where + ": expected " + std::to_string(rows[0].size()) + " cells");
    train::DatasetRecord rec;
    const double wi = parse_number(rows[r][cols[2]], where);
    if (wi < 0 || wi >= static_cast<double>(ds.weather_pool.size())) throw InputError(where + ": weather index out of range");
    rec.weather_index = static_cast<std::size_t>(wi);
    std::size_t c = 3;
    for (std::size_t k = 0; k < BuildingParams::kCount; ++k) rec.scenario.building[k] = parse_number(rows[r][cols[c++]], where);
    for (const auto& ref : refs) variable(rec.scenario, ref) = parse_number(rows[r][cols[c++]], where);
    for (std::size_t k = 0; k < OccupancySchedule::kCount; ++k)
      rec.scenario.occupancy[k] = parse_number(rows[r][cols[c++]], where);
    rec.scenario.occupancy.max_occupants = rec.scenario.building.nb_occupants;
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.size() != ds.splits.total())
    throw InputError(ep_path + ": " + std::to_string(ds.records.size()) + " examples, manifest says " +
                     std::to_string(ds.splits.total()));

  const std::string t_path = dir + "/targets.csv";
  const auto trows = parse_csv(read_file(t_path), t_path);
  std::vector<std::string> tnames = {"index", "hour"};
  for (auto n : output_names()) tnames.emplace_back(n);
  const auto tcols = header_columns(trows[0], tnames, t_path);
  if (trows.size() - 1 != ds.records.size() * kHoursPerWeek)
    throw InputError(t_path + ": expected " + std::to_string(ds.records.size() * kHoursPerWeek) + " rows");
  for (std::size_t r = 1; r < trows.size(); ++r) {
    const std::string where = t_path + " line " + std::to_string(r + 1);
    const std::size_t i = (r - 1) / kHoursPerWeek, h = (r - 1) % kHoursPerWeek;
    if (parse_number(trows[r][tcols[0]], where) != static_cast<double>(i) ||
        parse_number(trows[r][tcols[1]], where) != static_cast<double>(h))
      throw InputError(where + ": rows must be ordered by index, then hour");
    for (std::size_t c = 0; c < kOutputChannels; ++c)
      ds.records[i].output.hours[h][c] = parse_number(trows[r][tcols[2 + c]], where);
  }
  return ds;
}

// ---- simulator configuration ----

inline json to_json(const sim::RcModelConfig& c) {
  return {{"facade_area_m2", c.facade_area_m2},
          {"facade5_area_m2", c.facade5_area_m2},
          {"facade5_thickness_m", c.facade5_thickness_m},
          {"roof_area_m2", c.roof_area_m2},
          {"ground_area_m2", c.ground_area_m2},
          {"floor_area_m2", c.floor_area_m2},
          {"storey_height_m", c.storey_height_m},
          {"insulation_conductivity", c.insulation_conductivity},
          {"base_resistance", c.base_resistance},
          {"window_u", c.window_u},
          {"ground_u", c.ground_u},
          {"shgc", c.shgc},
          {"facade_irradiance_factor", c.facade_irradiance_factor},
          {"solar_to_mass", c.solar_to_mass},
          {"gain_per_occupant_w", c.gain_per_occupant_w},
          {"power_per_pc_w", c.power_per_pc_w},
          {"lighting_w_per_m2", c.lighting_w_per_m2},
          {"air_heat_capacity", c.air_heat_capacity},
          {"air_node_multiplier", c.air_node_multiplier},
          {"interior_coupling_kw_per_k", c.interior_coupling_kw_per_k},
          {"control_gain_kw_per_k", c.control_gain_kw_per_k},
          {"deadband", c.deadband},
          {"substeps", c.substeps}};
}

// Keys absent from the JSON keep their defaults; unknown keys are rejected.
inline sim::RcModelConfig rc_config_from_json(const json& j) {
  sim::RcModelConfig c;
  json full = to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!full.contains(it.key())) throw InputError("simulator config: unknown key '" + it.key() + "'");
    full[it.key()] = it.value();
  }
  try {
    c.facade_area_m2 = full.at("facade_area_m2").get<std::array<double, 4>>();
    c.facade5_area_m2 = full.at("facade5_area_m2").get<double>();
    c.facade5_thickness_m = full.at("facade5_thickness_m").get<double>();
    c.roof_area_m2 = full.at("roof_area_m2").get<double>();
    c.ground_area_m2 = full.at("ground_area_m2").get<double>();
    c.floor_area_m2 = full.at("floor_area_m2").get<double>();
    c.storey_height_m = full.at("storey_height_m").get<double>();
    c.insulation_conductivity = full.at("insulation_conductivity").get<double>();
    c.base_resistance = full.at("base_resistance").get<double>();
    c.window_u = full.at("window_u").get<double>();
    c.ground_u = full.at("ground_u").get<double>();
    c.shgc = full.at("shgc").get<double>();
    c.facade_irradiance_factor = full.at("facade_irradiance_factor").get<double>();
    c.solar_to_mass = full.at("solar_to_mass").get<double>();
    c.gain_per_occupant_w = full.at("gain_per_occupant_w").get<double>();
    c.power_per_pc_w = full.at("power_per_pc_w").get<double>();
    c.lighting_w_per_m2 = full.at("lighting_w_per_m2").get<double>();
    c.air_heat_capacity = full.at("air_heat_capacity").get<double>();
    c.air_node_multiplier = full.at("air_node_multiplier").get<double>();
    c.interior_coupling_kw_per_k = full.at("interior_coupling_kw_per_k").get<double>();
    c.control_gain_kw_per_k = full.at("control_gain_kw_per_k").get<double>();
    c.deadband = full.at("deadband").get<double>();
    c.substeps = full.at("substeps").get<decltype(c.substeps)>();
  } catch (const json::exception& e) {
    throw InputError(std::string("simulator config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace bemopt::io
