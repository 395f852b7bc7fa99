#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "bemopt/core/error.hpp"
#include "bemopt/core/schema.hpp"

namespace bemopt {

inline constexpr std::size_t kHoursPerDay = 24;
inline constexpr std::size_t kDaysPerWeek = 7;
inline constexpr std::size_t kWeekdays = 5;
inline constexpr std::size_t kHoursPerWeek = kHoursPerDay * kDaysPerWeek;

using DailyValues = std::array<double, kDaysPerWeek>;

// Static geometric and thermal description of the building.
struct BuildingParams {
  double airchange_infiltration = 0.3;  // vol/h
  double capacitance = 150;             // kJ/(K m^3)
  double power_heat_kw = 600;
  double power_clim_kw = 600;
  double nb_occupants = 1400;
  double nb_pcs = 1600;
  double percent_light_night = 20;
  double percent_pcs_night = 20;
  std::array<double, 4> facade_thickness = {0.1, 0.1, 0.1, 0.1};  // m of insulation
  double roof_thickness = 0.1;
  std::array<double, 4> window_percent = {45, 45, 45, 45};

  static constexpr std::size_t kCount = 17;

  static const std::array<std::string_view, kCount>& names() {
    static const std::array<std::string_view, kCount> n = {
        "airchange_infiltration_vol_per_h", "capacitance_kJ_perdegreK_perm3",
        "power_VCV_kW_heat", "power_VCV_kW_clim", "nb_occupants", "nb_PCs",
        "percent_light_night", "percent_PCs_night", "facade_1_thickness_2",
        "facade_2_thickness_2", "facade_3_thickness_2", "facade_4_thickness_2",
        "roof_1_thickness_3", "facade_1_window_area_percent", "facade_2_window_area_percent",
        "facade_3_window_area_percent", "facade_4_window_area_percent"};
    return n;
  }

  double& operator[](std::size_t i) {
    switch (i) {
      case 0: return airchange_infiltration;
      case 1: return capacitance;
      case 2: return power_heat_kw;
      case 3: return power_clim_kw;
      case 4: return nb_occupants;
      case 5: return nb_pcs;
      case 6: return percent_light_night;
      case 7: return percent_pcs_night;
      case 8: case 9: case 10: case 11: return facade_thickness[i - 8];
      case 12: return roof_thickness;
      case 13: case 14: case 15: case 16: return window_percent[i - 13];
      default: throw InputError("building parameter index out of range");
    }
  }
  double operator[](std::size_t i) const { return const_cast<BuildingParams&>(*this)[i]; }

  bool operator==(const BuildingParams&) const = default;
};

// BMS settings (I_k): one value per day of the week for every variable.
struct BmsSchedule {
  DailyValues start_clim{}, end_clim{}, t_clim_red{}, t_clim_conf{};
  DailyValues start_heat{}, end_heat{}, t_heat_red{}, t_heat_conf{};
  DailyValues start_ventilation{}, end_ventilation{}, t_ventilation{}, vol_ventilation{};

  static constexpr std::size_t kCount = 12;

  static const std::array<std::string_view, kCount>& names() {
    static const std::array<std::string_view, kCount> n = {
        "start_clim_day", "end_clim_day", "t_clim_red_day", "t_clim_conf_day",
        "start_heat_day", "end_heat_day", "t_heat_red_day", "t_heat_conf_day",
        "start_ventilation_day", "end_ventilation_day", "t_ventilation_day", "vol_ventilation_day"};
    return n;
  }

  DailyValues& operator[](std::size_t i) {
    DailyValues* table[kCount] = {&start_clim, &end_clim, &t_clim_red, &t_clim_conf,
                                  &start_heat, &end_heat, &t_heat_red, &t_heat_conf,
                                  &start_ventilation, &end_ventilation, &t_ventilation, &vol_ventilation};
    if (i >= kCount) throw InputError("BMS variable index out of range");
    return *table[i];
  }
  const DailyValues& operator[](std::size_t i) const { return const_cast<BmsSchedule&>(*this)[i]; }

  // Same value on every day.
  static BmsSchedule uniform(std::array<double, kCount> values) {
    BmsSchedule s;
    for (std::size_t i = 0; i < kCount; ++i) s[i].fill(values[i]);
    return s;
  }

  bool operator==(const BmsSchedule&) const = default;
};

// Weekday occupation window; weekends are unoccupied.
struct OccupancySchedule {
  std::array<double, kWeekdays> start = {8, 8, 8, 8, 8};
  std::array<double, kWeekdays> end = {18, 18, 18, 18, 18};
  double max_occupants = 1400;

  static constexpr std::size_t kCount = 2 * kWeekdays;

  static const std::array<std::string_view, kCount>& names() {
    static const std::array<std::string_view, kCount> n = {
        "start_occupation_monday", "start_occupation_tuesday", "start_occupation_wednesday",
        "start_occupation_thursday", "start_occupation_friday", "end_occupation_monday",
        "end_occupation_tuesday", "end_occupation_wednesday", "end_occupation_thursday",
        "end_occupation_friday"};
    return n;
  }

  double& operator[](std::size_t i) {
    if (i >= kCount) throw InputError("occupancy variable index out of range");
    return i < kWeekdays ? start[i] : end[i - kWeekdays];
  }
  double operator[](std::size_t i) const { return const_cast<OccupancySchedule&>(*this)[i]; }

  // Hour h of the week (Monday 00:00 = 0) is occupied when it lies in [start, end) of a weekday.
  bool occupied(std::size_t hour_of_week) const {
    const std::size_t day = hour_of_week / kHoursPerDay;
    if (day >= kWeekdays) return false;
    const double h = static_cast<double>(hour_of_week % kHoursPerDay);
    return h >= start[day] && h < end[day];
  }

  std::size_t occupied_hours() const {
    std::size_t n = 0;
    for (std::size_t h = 0; h < kHoursPerWeek; ++h) n += occupied(h) ? 1 : 0;
    return n;
  }

  bool operator==(const OccupancySchedule&) const = default;
};

struct WeatherRecord {
  double dni = 0, ibeam_h = 0, ibeam_n = 0, idiff_h = 0, iglob_h = 0, rhum = 50, tamb = 10;

  static constexpr std::size_t kCount = 7;
  static const std::array<std::string_view, kCount>& names() {
    static const std::array<std::string_view, kCount> n = {"DNI", "IBEAM_H", "IBEAM_N", "IDIFF_H",
                                                           "IGLOB_H", "RHUM", "TAMB"};
    return n;
  }
  double& operator[](std::size_t i) {
    double* t[kCount] = {&dni, &ibeam_h, &ibeam_n, &idiff_h, &iglob_h, &rhum, &tamb};
    if (i >= kCount) throw InputError("weather channel index out of range");
    return *t[i];
  }
  double operator[](std::size_t i) const { return const_cast<WeatherRecord&>(*this)[i]; }
  bool operator==(const WeatherRecord&) const = default;
};

// One week of hourly weather (W_k).
class WeatherSeries {
 public:
  WeatherSeries() : records_(kHoursPerWeek) {}
  explicit WeatherSeries(std::vector<WeatherRecord> records) : records_(std::move(records)) {
    if (records_.size() != kHoursPerWeek)
      throw InputError("weather series must hold exactly 168 hourly records, got " +
                       std::to_string(records_.size()));
    for (std::size_t h = 0; h < records_.size(); ++h) {
      const auto& r = records_[h];
      for (std::size_t c = 0; c < WeatherRecord::kCount; ++c)
        if (!std::isfinite(r[c]))
          throw InputError("weather hour " + std::to_string(h) + ": non-finite value");
      if (r.dni < 0 || r.ibeam_h < 0 || r.ibeam_n < 0 || r.idiff_h < 0 || r.iglob_h < 0)
        throw InputError("weather hour " + std::to_string(h) + ": negative irradiance");
      if (r.rhum < 0 || r.rhum > 100)
        throw InputError("weather hour " + std::to_string(h) + ": humidity outside [0, 100]");
    }
  }

  std::size_t size() const { return records_.size(); }
  const WeatherRecord& operator[](std::size_t h) const { return records_[h]; }
  const std::vector<WeatherRecord>& records() const { return records_; }
  bool operator==(const WeatherSeries&) const = default;

 private:
  std::vector<WeatherRecord> records_;
};

// Output channel order of the simulator and the metamodel.
enum OutputChannel : std::size_t {
  kQAcOffice = 0,
  kQHeatOffice,
  kQPeople,
  kQEqp,
  kQLight,
  kQAhuC,
  kQAhuH,
  kTIntOffice,
  kOutputChannels
};

inline const std::array<std::string_view, kOutputChannels>& output_names() {
  static const std::array<std::string_view, kOutputChannels> n = {
      "Q_AC_OFFICE", "Q_HEAT_OFFICE", "Q_PEOPLE", "Q_EQP", "Q_LIGHT", "Q_AHU_C", "Q_AHU_H", "T_INT_OFFICE"};
  return n;
}

// Channels summed into the metered heat consumption.
inline constexpr std::array<std::size_t, 4> kHeatAggregateChannels = {kQHeatOffice, kQAhuH, kQEqp, kQLight};

struct OutputRecord {
  std::array<double, kOutputChannels> values{};

  double& operator[](std::size_t c) { return values[c]; }
  double operator[](std::size_t c) const { return values[c]; }
  double heat_aggregate() const {
    double s = 0;
    for (auto c : kHeatAggregateChannels) s += values[c];
    return s;
  }
  bool operator==(const OutputRecord&) const = default;
};

// One simulated week (X_k).
struct SimOutput {
  std::vector<OutputRecord> hours = std::vector<OutputRecord>(kHoursPerWeek);

  std::size_t size() const { return hours.size(); }
  const OutputRecord& operator[](std::size_t h) const { return hours[h]; }
  OutputRecord& operator[](std::size_t h) { return hours[h]; }
  bool operator==(const SimOutput&) const = default;
};

// Every schedule/parameter input of one simulated week except weather.
struct Scenario {
  BuildingParams building;
  BmsSchedule bms;
  OccupancySchedule occupancy;
  bool operator==(const Scenario&) const = default;
};

// ---- Range validation against a schema ------------------------------------

namespace detail {
inline void check_range(const Schema& schema, std::string_view name, double value, std::string_view where) {
  const auto& spec = schema.at(name);
  const double tol = 1e-9 * std::max(1.0, std::abs(spec.max));
  if (!std::isfinite(value) || value < spec.min - tol || value > spec.max + tol)
    throw InputError(std::string(where) + " '" + std::string(name) + "' = " + std::to_string(value) +
                     " outside [" + std::to_string(spec.min) + ", " + std::to_string(spec.max) + "]");
}
}  // namespace detail

inline void validate(const Schema& schema, const BuildingParams& p) {
  for (std::size_t i = 0; i < BuildingParams::kCount; ++i)
    detail::check_range(schema, BuildingParams::names()[i], p[i], "building parameter");
}

inline void validate(const Schema& schema, const BmsSchedule& s) {
  for (std::size_t i = 0; i < BmsSchedule::kCount; ++i)
    for (std::size_t d = 0; d < kDaysPerWeek; ++d)
      detail::check_range(schema, BmsSchedule::names()[i], s[i][d], "BMS setting");
  for (std::size_t d = 0; d < kDaysPerWeek; ++d) {
    if (!(s.start_clim[d] < s.end_clim[d]) || !(s.start_heat[d] < s.end_heat[d]) ||
        !(s.start_ventilation[d] < s.end_ventilation[d]))
      throw InputError("BMS day " + std::to_string(d) + ": schedule start must precede end");
    if (s.t_heat_conf[d] < s.t_heat_red[d])
      throw InputError("BMS day " + std::to_string(d) + ": heating comfort setpoint below reduced setpoint");
  }
}

inline void validate(const Schema& schema, const OccupancySchedule& o) {
  for (std::size_t i = 0; i < OccupancySchedule::kCount; ++i)
    detail::check_range(schema, OccupancySchedule::names()[i], o[i], "occupancy");
  if (!(o.max_occupants >= 0)) throw InputError("occupancy: negative max_occupants");
}

inline void validate(const Schema& schema, const Scenario& s) {
  validate(schema, s.building);
  validate(schema, s.bms);
  validate(schema, s.occupancy);
}

// ---- Named access to scenario variables -----------------------------------

// Address of one scalar input: a schema name plus, for BMS variables, the day.
struct VariableRef {
  std::string name;
  int day = -1;  // 0 = Monday; -1 for non-daily variables

  std::string label() const { return day < 0 ? name : name + "[" + std::to_string(day) + "]"; }
  bool operator==(const VariableRef&) const = default;
};

inline double& variable(Scenario& s, const VariableRef& ref) {
  const auto& bn = BuildingParams::names();
  for (std::size_t i = 0; i < bn.size(); ++i)
    if (bn[i] == ref.name) return s.building[i];
  const auto& on = OccupancySchedule::names();
  for (std::size_t i = 0; i < on.size(); ++i)
    if (on[i] == ref.name) return s.occupancy[i];
  const auto& in = BmsSchedule::names();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == ref.name) {
      if (ref.day < 0 || ref.day >= static_cast<int>(kDaysPerWeek))
        throw InputError("BMS variable '" + ref.name + "' needs a day index 0..6");
      return s.bms[i][static_cast<std::size_t>(ref.day)];
    }
  }
  throw InputError("unknown input variable '" + ref.name + "'");
}

inline double variable(const Scenario& s, const VariableRef& ref) {
  return variable(const_cast<Scenario&>(s), ref);
}

inline bool is_bms_variable(std::string_view name) {
  for (auto n : BmsSchedule::names())
    if (n == name) return true;
  return false;
}

// The 84 BMS coordinates (12 variables x 7 days), variable-major.
inline std::vector<VariableRef> bms_variables() {
  std::vector<VariableRef> refs;
  for (auto n : BmsSchedule::names())
    for (int d = 0; d < static_cast<int>(kDaysPerWeek); ++d) refs.push_back({std::string(n), d});
  return refs;
}

}  // namespace bemopt
