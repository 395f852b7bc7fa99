#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bemopt/core/rng.hpp"
#include "bemopt/core/types.hpp"

namespace bemopt::sim {

// Parameters of a synthetic week of mid-latitude weather.
struct WeatherProfile {
  double day_of_year = 310;   // first day of the week
  double mean_temperature = 9;
  double diurnal_amplitude = 4;
  double cloudiness = 0.5;    // 0 clear .. 1 overcast, weekly mean
  double latitude_deg = 48.8;
};

// Profile drawn for a week between May and December.
inline WeatherProfile random_profile(Rng& rng) {
  WeatherProfile p;
  p.day_of_year = rng.uniform(121.0, 358.0);
  const double seasonal = 12.0 + 7.5 * std::cos(2.0 * std::numbers::pi * (p.day_of_year - 200.0) / 365.0);
  p.mean_temperature = seasonal + rng.normal(0.0, 2.5);
  p.cloudiness = rng.uniform(0.1, 0.9);
  p.diurnal_amplitude = rng.uniform(2.0, 6.0) * (1.2 - 0.6 * p.cloudiness);
  return p;
}

inline double solar_elevation_sine(double day_of_year, double hour_of_day, double latitude_deg) {
  const double deg = std::numbers::pi / 180.0;
  const double declination = 23.44 * deg * std::sin(2.0 * std::numbers::pi * (284.0 + day_of_year) / 365.0);
  const double hour_angle = (hour_of_day + 0.5 - 12.0) * 15.0 * deg;
  const double lat = latitude_deg * deg;
  return std::sin(lat) * std::sin(declination) + std::cos(lat) * std::cos(declination) * std::cos(hour_angle);
}

inline WeatherSeries synthesize_week(const WeatherProfile& profile, Rng& rng) {
  std::vector<WeatherRecord> records(kHoursPerWeek);
  double day_offset = rng.normal(0.0, 1.5);
  double cloud = std::clamp(profile.cloudiness + rng.normal(0.0, 0.15), 0.0, 1.0);
  for (std::size_t d = 0; d < kDaysPerWeek; ++d) {
    day_offset = 0.6 * day_offset + rng.normal(0.0, 1.5);
    cloud = std::clamp(0.5 * cloud + 0.5 * profile.cloudiness + rng.normal(0.0, 0.2), 0.0, 1.0);
    const double amplitude = profile.diurnal_amplitude * (1.1 - 0.5 * cloud);
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
      const std::size_t k = d * kHoursPerDay + h;
      const double hour_cloud = std::clamp(cloud + rng.normal(0.0, 0.08), 0.0, 1.0);
      const double sin_el = solar_elevation_sine(profile.day_of_year + static_cast<double>(d),
                                                 static_cast<double>(h), profile.latitude_deg);
      WeatherRecord r;
      if (sin_el > 0.02) {
        const double clear_dni = 950.0 * std::exp(-0.15 / sin_el);
        r.dni = clear_dni * (1.0 - 0.9 * hour_cloud);
        r.ibeam_n = r.dni;
        r.ibeam_h = r.dni * sin_el;
        r.idiff_h = (80.0 + 220.0 * hour_cloud * (1.0 - hour_cloud) + 60.0 * hour_cloud) * sin_el;
        r.iglob_h = r.ibeam_h + r.idiff_h;
      }
      const double diurnal = std::sin(2.0 * std::numbers::pi * (static_cast<double>(h) - 9.0) / 24.0);
      r.tamb = profile.mean_temperature + day_offset + amplitude * diurnal + rng.normal(0.0, 0.3);
      r.rhum = std::clamp(78.0 - 2.5 * (r.tamb - profile.mean_temperature) + 12.0 * (hour_cloud - 0.5) +
                              rng.normal(0.0, 3.0),
                          15.0, 100.0);
      records[k] = r;
    }
  }
  return WeatherSeries(std::move(records));
}

inline std::vector<WeatherSeries> synthesize_pool(std::size_t weeks, std::uint64_t seed) {
  std::vector<WeatherSeries> pool;
  pool.reserve(weeks);
  for (std::size_t i = 0; i < weeks; ++i) {
    Rng rng = Rng::stream(seed, "weather-week", i);
    const WeatherProfile profile = random_profile(rng);
    pool.push_back(synthesize_week(profile, rng));
  }
  return pool;
}

}  // namespace bemopt::sim
