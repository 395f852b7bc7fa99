#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "bemopt/core/error.hpp"
#include "bemopt/core/types.hpp"

namespace bemopt::sim {

// Constants of the two-node (air + envelope mass) thermal model.
struct RcModelConfig {
  std::array<double, 4> facade_area_m2 = {3521, 2692, 3257, 599};
  double facade5_area_m2 = 16329;  // opaque, fixed insulation
  double facade5_thickness_m = 0.10;
  double roof_area_m2 = 4789;
  double ground_area_m2 = 4789;
  double floor_area_m2 = 28733;
  double storey_height_m = 3.0;

  double insulation_conductivity = 0.04;  // W/(m K)
  double base_resistance = 0.5;           // m2 K/W, surface films and structure
  double window_u = 2.8;                  // W/(m2 K)
  double ground_u = 0.35;                 // W/(m2 K)

  double shgc = 0.6;
  double facade_irradiance_factor = 0.4;  // vertical glazing vs horizontal global irradiance
  double solar_to_mass = 0.5;             // share of solar gain absorbed by the mass node

  double gain_per_occupant_w = 100;
  double power_per_pc_w = 60;
  double lighting_w_per_m2 = 6;

  double air_heat_capacity = 1206;   // rho * c of air, J/(m3 K)
  double air_node_multiplier = 5;    // furniture and partitions lumped with the air
  double interior_coupling_kw_per_k = 300;

  double control_gain_kw_per_k = 50;
  double deadband = 0.5;
  int substeps = 6;

  double volume_m3() const { return floor_area_m2 * storey_height_m; }

  // Conductance (W/K) per m3/h-of-volume air change: rho*c*V/3600.
  double air_change_conductance() const { return air_heat_capacity * volume_m3() / 3600.0; }

  double opaque_u(double insulation_m) const { return 1.0 / (base_resistance + insulation_m / insulation_conductivity); }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0) || !std::isfinite(v)) throw InputError(std::string("RC config: ") + what + " must be positive");
    };
    for (double a : facade_area_m2) positive(a, "facade area");
    positive(facade5_area_m2, "facade 5 area");
    positive(roof_area_m2, "roof area");
    positive(ground_area_m2, "ground area");
    positive(floor_area_m2, "floor area");
    positive(storey_height_m, "storey height");
    positive(insulation_conductivity, "insulation conductivity");
    positive(base_resistance, "base resistance");
    positive(window_u, "window U");
    positive(ground_u, "ground U");
    positive(shgc, "SHGC");
    positive(facade_irradiance_factor, "facade irradiance factor");
    positive(air_heat_capacity, "air heat capacity");
    positive(air_node_multiplier, "air node multiplier");
    positive(interior_coupling_kw_per_k, "interior coupling");
    positive(control_gain_kw_per_k, "control gain");
    if (!(solar_to_mass >= 0 && solar_to_mass <= 1)) throw InputError("RC config: solar_to_mass must lie in [0, 1]");
    if (!(deadband >= 0)) throw InputError("RC config: deadband must be non-negative");
    if (substeps < 1) throw InputError("RC config: substeps must be >= 1");
  }
};

struct ZoneState {
  double air = 20.0;   // °C
  double mass = 20.0;  // °C
  bool operator==(const ZoneState&) const = default;
};

// Envelope conductances (W/K) derived from the building parameters.
struct Envelope {
  double air_to_outside = 0;   // windows + infiltration
  double mass_to_outside = 0;  // opaque walls, roof, ground
  double window_area = 0;      // m2
  double air_capacity = 0;     // J/K
  double mass_capacity = 0;    // J/K

  double total_ua(double interior_coupling) const {
    const double series = interior_coupling * mass_to_outside / (interior_coupling + mass_to_outside);
    return air_to_outside + series;
  }
};

inline Envelope envelope(const BuildingParams& p, const RcModelConfig& cfg) {
  Envelope e;
  double opaque = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double glazing = cfg.facade_area_m2[i] * p.window_percent[i] / 100.0;
    e.window_area += glazing;
    e.air_to_outside += glazing * cfg.window_u;
    opaque += (cfg.facade_area_m2[i] - glazing) * cfg.opaque_u(p.facade_thickness[i]);
  }
  opaque += cfg.facade5_area_m2 * cfg.opaque_u(cfg.facade5_thickness_m);
  opaque += cfg.roof_area_m2 * cfg.opaque_u(p.roof_thickness);
  opaque += cfg.ground_area_m2 * cfg.ground_u;
  e.mass_to_outside = opaque;
  e.air_to_outside += p.airchange_infiltration * cfg.air_change_conductance();
  e.air_capacity = cfg.air_heat_capacity * cfg.volume_m3() * cfg.air_node_multiplier;
  e.mass_capacity = p.capacitance * 1000.0 * cfg.volume_m3();
  return e;
}

inline bool in_window(double hour_of_day, double start, double end) { return hour_of_day >= start && hour_of_day < end; }

struct HvacCommand {
  double heat_kw = 0;
  double cool_kw = 0;
  double heat_setpoint = 0;
  double cool_setpoint = 0;  // effective, at least heat_setpoint + deadband
};

// Proportional heating/cooling demand at indoor temperature `t` during hour `hour` of the week.
inline HvacCommand hvac_control(double t, std::size_t hour, const BmsSchedule& bms, const BuildingParams& p,
                                const RcModelConfig& cfg) {
  const std::size_t day = (hour / kHoursPerDay) % kDaysPerWeek;
  const double h = static_cast<double>(hour % kHoursPerDay);
  HvacCommand cmd;
  cmd.heat_setpoint = in_window(h, bms.start_heat[day], bms.end_heat[day]) ? bms.t_heat_conf[day] : bms.t_heat_red[day];
  const double clim = in_window(h, bms.start_clim[day], bms.end_clim[day]) ? bms.t_clim_conf[day] : bms.t_clim_red[day];
  cmd.cool_setpoint = std::max(clim, cmd.heat_setpoint + cfg.deadband);
  cmd.heat_kw = std::clamp(cfg.control_gain_kw_per_k * (cmd.heat_setpoint - t), 0.0, p.power_heat_kw);
  cmd.cool_kw = std::clamp(cfg.control_gain_kw_per_k * (t - cmd.cool_setpoint), 0.0, p.power_clim_kw);
  return cmd;
}

struct AhuLoad {
  double heating_kw = 0;
  double cooling_kw = 0;
  double supply_conductance = 0;  // W/K of supply air delivered at t_ventilation
  double supply_temperature = 0;
};

// Outside-air conditioning by the air handling unit.
inline AhuLoad ahu_load(std::size_t hour, const BmsSchedule& bms, const WeatherSeries& weather, const RcModelConfig& cfg) {
  const std::size_t day = (hour / kHoursPerDay) % kDaysPerWeek;
  const double h = static_cast<double>(hour % kHoursPerDay);
  AhuLoad load;
  load.supply_temperature = bms.t_ventilation[day];
  if (!in_window(h, bms.start_ventilation[day], bms.end_ventilation[day])) return load;
  load.supply_conductance = bms.vol_ventilation[day] * cfg.air_change_conductance();
  const double lift = bms.t_ventilation[day] - weather[hour % kHoursPerWeek].tamb;
  const double kw = load.supply_conductance * std::abs(lift) / 1000.0;
  if (lift > 0) load.heating_kw = kw;
  else load.cooling_kw = kw;
  return load;
}

// Constant inputs over one integration sub-step.
struct StepInputs {
  double outside = 0;              // °C
  double supply = 0;               // °C
  double supply_conductance = 0;   // W/K
  double air_power = 0;            // W into the air node (gains and saturated HVAC)
  double mass_power = 0;           // W into the mass node
  double control_conductance = 0;  // W/K of an unsaturated proportional controller
  double control_setpoint = 0;     // °C it drives the air towards
};

// Linear system x' = A x + b of the two nodes.
struct LinearSystem {
  double a11, a12, a21, a22, b1, b2;
};

inline LinearSystem rc_system(const Envelope& env, double interior_coupling_w, const StepInputs& in) {
  const double ca = env.air_capacity, cm = env.mass_capacity, h = interior_coupling_w;
  LinearSystem s{};
  s.a11 = -(env.air_to_outside + in.supply_conductance + h + in.control_conductance) / ca;
  s.a12 = h / ca;
  s.a21 = h / cm;
  s.a22 = -(h + env.mass_to_outside) / cm;
  s.b1 = (env.air_to_outside * in.outside + in.supply_conductance * in.supply +
          in.control_conductance * in.control_setpoint + in.air_power) / ca;
  s.b2 = (env.mass_to_outside * in.outside + in.mass_power) / cm;
  return s;
}

// Exact solution of the linear two-node system over `dt` seconds.
inline ZoneState advance(const LinearSystem& s, const ZoneState& x0, double dt) {
  const double det = s.a11 * s.a22 - s.a12 * s.a21;
  // Equilibrium x* = -A^{-1} b.
  const double e1 = -(s.a22 * s.b1 - s.a12 * s.b2) / det;
  const double e2 = -(-s.a21 * s.b1 + s.a11 * s.b2) / det;
  const double d1 = x0.air - e1, d2 = x0.mass - e2;

  const double tr = s.a11 + s.a22;
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  const double l1 = 0.5 * tr + disc, l2 = 0.5 * tr - disc;
  double m11, m12, m21, m22;  // exp(A dt)
  if (l1 - l2 > 1e-12 * std::abs(l2)) {
    const double x1 = std::exp(l1 * dt), x2 = std::exp(l2 * dt), inv = 1.0 / (l1 - l2);
    m11 = (x1 * (s.a11 - l2) - x2 * (s.a11 - l1)) * inv;
    m12 = (x1 - x2) * s.a12 * inv;
    m21 = (x1 - x2) * s.a21 * inv;
    m22 = (x1 * (s.a22 - l2) - x2 * (s.a22 - l1)) * inv;
  } else {
    const double l = 0.5 * tr, x = std::exp(l * dt);
    m11 = x * (1 + (s.a11 - l) * dt);
    m12 = x * s.a12 * dt;
    m21 = x * s.a21 * dt;
    m22 = x * (1 + (s.a22 - l) * dt);
  }
  return {e1 + m11 * d1 + m12 * d2, e2 + m21 * d1 + m22 * d2};
}

// Time integral of the air temperature along the exact trajectory from x0 to x1:
// from x' = A x + b, the integral of x is A^{-1} (x1 - x0 - b dt).
inline double air_integral(const LinearSystem& s, const ZoneState& x0, const ZoneState& x1, double dt) {
  const double det = s.a11 * s.a22 - s.a12 * s.a21;
  const double r1 = x1.air - x0.air - s.b1 * dt, r2 = x1.mass - x0.mass - s.b2 * dt;
  return (s.a22 * r1 - s.a12 * r2) / det;
}

// Internal gains (kW) for one hour.
struct InternalGains {
  double people_kw = 0, equipment_kw = 0, lighting_kw = 0;
};

inline InternalGains internal_gains(std::size_t hour, const BuildingParams& p, const OccupancySchedule& occ,
                                    const RcModelConfig& cfg) {
  const bool occupied = occ.occupied(hour % kHoursPerWeek);
  InternalGains g;
  g.people_kw = occupied ? p.nb_occupants * cfg.gain_per_occupant_w / 1000.0 : 0.0;
  const double pc_share = occupied ? 1.0 : p.percent_pcs_night / 100.0;
  const double light_share = occupied ? 1.0 : p.percent_light_night / 100.0;
  g.equipment_kw = p.nb_pcs * cfg.power_per_pc_w / 1000.0 * pc_share;
  g.lighting_kw = cfg.floor_area_m2 * cfg.lighting_w_per_m2 / 1000.0 * light_share;
  return g;
}

inline double solar_gain_kw(const WeatherRecord& w, const Envelope& env, const RcModelConfig& cfg) {
  return w.iglob_h * env.window_area * cfg.facade_irradiance_factor * cfg.shgc / 1000.0;
}

inline constexpr int kMaxBisections = 12;

// Everything needed to reproduce one integration interval, exposed for energy-balance checks.
struct SubstepTrace {
  ZoneState start, end;
  StepInputs inputs;
  double dt = 0;
};

struct WeekResult {
  SimOutput output;
  ZoneState final_state;
};

// Simulates one week starting from `initial`. `on_substep`, when given, receives every integration interval.
template <typename Observer>
WeekResult run_week(const Scenario& sc, const WeatherSeries& weather, const RcModelConfig& cfg, ZoneState initial,
                    Observer&& on_substep) {
  cfg.validate();
  const auto& p = sc.building;
  const Envelope env = envelope(p, cfg);
  const double coupling = cfg.interior_coupling_kw_per_k * 1000.0;
  const double dt = 3600.0 / cfg.substeps;
  const double gain = cfg.control_gain_kw_per_k * 1000.0;
  WeekResult res;
  ZoneState x = initial;
  for (std::size_t hour = 0; hour < kHoursPerWeek; ++hour) {
    const auto& w = weather[hour];
    const InternalGains gains = internal_gains(hour, p, sc.occupancy, cfg);
    const AhuLoad ahu = ahu_load(hour, sc.bms, weather, cfg);
    const double solar = solar_gain_kw(w, env, cfg);

    // One mode per hour so heating and cooling are never both reported.
    const HvacCommand at_start = hvac_control(x.air, hour, sc.bms, p, cfg);
    const bool heating_mode = x.air < 0.5 * (at_start.heat_setpoint + at_start.cool_setpoint);
    const double setpoint = heating_mode ? at_start.heat_setpoint : at_start.cool_setpoint;
    const double cap = 1000.0 * (heating_mode ? p.power_heat_kw : p.power_clim_kw);
    const double sign = heating_mode ? 1.0 : -1.0;

    StepInputs base;
    base.outside = w.tamb;
    base.supply = ahu.supply_temperature;
    base.supply_conductance = ahu.supply_conductance;
    base.air_power = 1000.0 * (gains.people_kw + gains.equipment_kw + gains.lighting_kw + (1.0 - cfg.solar_to_mass) * solar);
    base.mass_power = 1000.0 * cfg.solar_to_mass * solar;

    // The controller is off, proportional or saturated; each regime is linear
    // and integrated exactly, and an interval whose regime changes is bisected.
    auto regime = [&](double t) {
      const double demand = gain * sign * (setpoint - t);
      return demand <= 0 ? 0 : (demand >= cap ? 2 : 1);
    };
    double hvac_energy = 0;  // J
    auto integrate = [&](auto&& self, const ZoneState& from, double span, int depth) -> ZoneState {
      const int r = regime(from.air);
      StepInputs in = base;
      if (r == 1) {
        in.control_conductance = gain;
        in.control_setpoint = setpoint;
      } else if (r == 2) {
        in.air_power += sign * cap;
      }
      const LinearSystem sys = rc_system(env, coupling, in);
      const ZoneState to = advance(sys, from, span);
      if (regime(to.air) != r && depth < kMaxBisections) {
        const ZoneState mid = self(self, from, 0.5 * span, depth + 1);
        return self(self, mid, 0.5 * span, depth + 1);
      }
      if (!std::isfinite(to.air) || !std::isfinite(to.mass) || to.air < -30.0 || to.air > 60.0)
        throw NumericalError("oracle simulation left the sanity band at hour " + std::to_string(hour) +
                             " (air temperature " + std::to_string(to.air) + " °C)");
      if (r == 1) hvac_energy += gain * sign * (setpoint * span - air_integral(sys, from, to, span));
      else if (r == 2) hvac_energy += cap * span;
      on_substep(SubstepTrace{from, to, in, span});
      return to;
    };
    for (int k = 0; k < cfg.substeps; ++k) x = integrate(integrate, x, dt, 0);
    const double hvac_kw = std::max(0.0, hvac_energy) / 3600.0 / 1000.0;
    OutputRecord& out = res.output[hour];
    out[kQAcOffice] = heating_mode ? 0.0 : hvac_kw;
    out[kQHeatOffice] = heating_mode ? hvac_kw : 0.0;
    out[kQPeople] = gains.people_kw;
    out[kQEqp] = gains.equipment_kw;
    out[kQLight] = gains.lighting_kw;
    out[kQAhuC] = ahu.cooling_kw;
    out[kQAhuH] = ahu.heating_kw;
    out[kTIntOffice] = x.air;
  }
  res.final_state = x;
  return res;
}

inline WeekResult run_week(const Scenario& sc, const WeatherSeries& weather, const RcModelConfig& cfg, ZoneState initial) {
  return run_week(sc, weather, cfg, initial, [](const SubstepTrace&) {});
}

// Simulates one week from a uniform initial temperature t0 (air and mass).
inline SimOutput simulate_week(const BuildingParams& params, const BmsSchedule& bms, const OccupancySchedule& occ,
                               const WeatherSeries& weather, const RcModelConfig& cfg, double t0) {
  return run_week(Scenario{params, bms, occ}, weather, cfg, ZoneState{t0, t0}).output;
}

// Runs the week once to settle the envelope mass, then reports the second pass.
// Labels then depend on the week's inputs rather than on an arbitrary initial state.
inline SimOutput simulate_settled_week(const Scenario& sc, const WeatherSeries& weather, const RcModelConfig& cfg,
                                       double t0 = 20.0) {
  const WeekResult warmup = run_week(sc, weather, cfg, ZoneState{t0, t0});
  return run_week(sc, weather, cfg, warmup.final_state).output;
}

}  // namespace bemopt::sim
