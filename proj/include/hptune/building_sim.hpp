#pragma once

#include <functional>
#include <span>

#include "hptune/core_model.hpp"

namespace hptune {

/// Two-node (air + mass) resistor-capacitor zone. Capacitances in kWh/K, resistances in K/kW.
struct BuildingParams {
  double c_air = 3.0;
  double c_mass = 12.0;
  double r_out = 8.0;
  double r_mass = 2.0;
  double solar_gain = 2.5;           // effective aperture [m²]
  double q_internal_occupied = 0.4;  // [kW]

  void validate() const;
};

struct HeatPumpModel {
  double q_nominal = 15.0;  // thermal capacity [kW]
  double phi = 4.0;         // electric kW per unit modulation
  double gamma = 1.0;       // startup (auxiliaries) power [kW]
  double cop = 3.0;

  void validate() const;
};

struct PlantState {
  double t_in = 20.0;
  double t_mass = 20.0;
};

/// Electric draw of the heat pump: 0 when off, phi*u + gamma otherwise.
double electric_power(const HeatPumpModel& hp, double u);

/// Useful heat into the zone [kW]; the startup overhead contributes nothing.
double heat_delivered(const HeatPumpModel& hp, double u);

/// One explicit-Euler step of the 2R2C model.
PlantState step(const BuildingParams& params, const HeatPumpModel& hp, const PlantState& state, double u,
                double t_out, double solar, bool occupied, double dt_seconds);

/// Spectral radius of the Euler transition matrix for step `dt_seconds`.
double euler_spectral_radius(const BuildingParams& params, double dt_seconds);

/// What a controller sees at one step: the measured state plus the exact future weather and
/// occupancy from `step` onward.
struct StepContext {
  int step = 0;
  Timestamp time{};
  PlantState state{};
  const WeatherSeries* weather = nullptr;
  std::span<const char> occupied;  // full run, 1 = occupied
};

using ControlPolicy = std::function<double(const StepContext&)>;

SimTrace run_closed_loop(const BuildingParams& params, const HeatPumpModel& hp, const ControlPolicy& controller,
                         const WeatherSeries& weather, const OccupancySchedule& schedule, const PlantState& init);

}  // namespace hptune
