#include "hptune/building_sim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "hptune/error.hpp"

namespace hptune {

namespace {

constexpr double kStateMin = -20.0;
constexpr double kStateMax = 60.0;

}  // namespace

void BuildingParams::validate() const {
  if (!(c_air > 0 && c_mass > 0 && r_out > 0 && r_mass > 0) || !(solar_gain >= 0) ||
      !(q_internal_occupied >= 0)) {
    throw Error(ErrorCode::InvalidArgument, "building capacitances/resistances must be > 0, gains >= 0");
  }
}

void HeatPumpModel::validate() const {
  if (!(q_nominal > 0 && phi > 0 && gamma >= 0 && cop > 0)) {
    throw Error(ErrorCode::InvalidArgument, "heat pump needs q_nominal > 0, phi > 0, gamma >= 0, cop > 0");
  }
}

double electric_power(const HeatPumpModel& hp, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw Error(ErrorCode::DomainError, "modulation outside [0, 1]");
  return u == 0.0 ? 0.0 : hp.phi * u + hp.gamma;
}

double heat_delivered(const HeatPumpModel& hp, double u) {
  return std::min(hp.cop * hp.phi * u, hp.q_nominal * u);
}

PlantState step(const BuildingParams& params, const HeatPumpModel& hp, const PlantState& state, double u,
                double t_out, double solar, bool occupied, double dt_seconds) {
  if (!(u >= 0.0 && u <= 1.0)) throw Error(ErrorCode::DomainError, "modulation outside [0, 1]");
  if (!(dt_seconds > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");

  const double dt_h = dt_seconds / 3600.0;
  const double q_air = (t_out - state.t_in) / params.r_out + (state.t_mass - state.t_in) / params.r_mass +
                       heat_delivered(hp, u) + params.solar_gain * solar / 1000.0 +
                       (occupied ? params.q_internal_occupied : 0.0);
  const double q_mass = (state.t_in - state.t_mass) / params.r_mass;

  PlantState next{state.t_in + dt_h * q_air / params.c_air, state.t_mass + dt_h * q_mass / params.c_mass};
  auto bad = [](double t) { return !std::isfinite(t) || t < kStateMin || t > kStateMax; };
  if (bad(next.t_in) || bad(next.t_mass)) {
    throw Error(ErrorCode::NumericalBlowup, "plant temperature left [-20, 60] degC");
  }
  return next;
}

double euler_spectral_radius(const BuildingParams& params, double dt_seconds) {
  const double dt_h = dt_seconds / 3600.0;
  Eigen::Matrix2d a;
  a << -(1.0 / params.r_out + 1.0 / params.r_mass) / params.c_air, 1.0 / (params.r_mass * params.c_air),
      1.0 / (params.r_mass * params.c_mass), -1.0 / (params.r_mass * params.c_mass);
  const Eigen::Matrix2d transition = Eigen::Matrix2d::Identity() + dt_h * a;
  return transition.eigenvalues().cwiseAbs().maxCoeff();
}

SimTrace run_closed_loop(const BuildingParams& params, const HeatPumpModel& hp, const ControlPolicy& controller,
                         const WeatherSeries& weather, const OccupancySchedule& schedule, const PlantState& init) {
  params.validate();
  hp.validate();
  weather.validate();
  const TimeGrid& grid = weather.grid;
  if (euler_spectral_radius(params, grid.step_seconds) >= 1.0) {
    throw Error(ErrorCode::NumericalBlowup, "Euler step unstable for these building parameters");
  }

  const auto n = static_cast<std::size_t>(grid.n_steps);
  std::vector<char> occupied(n);
  for (std::size_t i = 0; i < n; ++i) occupied[i] = occupancy_at(schedule, grid.at(static_cast<int>(i))) ? 1 : 0;

  SimTrace trace;
  trace.grid = grid;
  trace.weather = weather;
  trace.t_in.resize(n);
  trace.u.resize(n);
  trace.p_elec.resize(n);
  trace.occupied.resize(n);

  PlantState state = init;
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(i);
    try {
      StepContext ctx{k, grid.at(k), state, &weather, occupied};
      const double u = controller(ctx);
      if (!(u >= 0.0 && u <= 1.0)) throw Error(ErrorCode::DomainError, "controller returned u outside [0, 1]");
      trace.t_in[i] = state.t_in;
      trace.u[i] = u;
      trace.p_elec[i] = electric_power(hp, u);
      trace.occupied[i] = occupied[i] != 0;
      state = step(params, hp, state, u, weather.t_out[i], weather.solar[i], occupied[i] != 0, grid.step_seconds);
    } catch (const Error& e) {
      throw Error(e.code(), "at step " + std::to_string(k) + ": " + e.detail());
    }
  }
  return trace;
}

}  // namespace hptune
