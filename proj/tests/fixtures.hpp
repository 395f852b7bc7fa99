#pragma once

#include <vector>

#include "bemopt/core/types.hpp"

namespace bemopt::fixtures {

// A plausible office schedule: every system runs 7:00-19:00.
inline BmsSchedule office_bms() {
  return BmsSchedule::uniform({7, 19, 28, 24, 7, 19, 18, 21, 7, 19, 19, 1.0});
}

inline Scenario office_scenario() {
  Scenario s;
  s.bms = office_bms();
  return s;
}

inline WeatherSeries constant_weather(double tamb, double iglob = 0.0) {
  WeatherRecord r;
  r.tamb = tamb;
  r.iglob_h = iglob;
  r.idiff_h = iglob;
  return WeatherSeries(std::vector<WeatherRecord>(kHoursPerWeek, r));
}

}  // namespace bemopt::fixtures
