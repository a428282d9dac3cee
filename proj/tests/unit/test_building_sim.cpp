#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "hptune/building_sim.hpp"
#include "hptune/error.hpp"

using namespace hptune;

namespace {

// Solves the right-hand side = 0 balance for constant inputs.
Eigen::Vector2d steady_state(const BuildingParams& b, double heat_kw, double t_out) {
  Eigen::Matrix2d m;
  m << -(1.0 / b.r_out + 1.0 / b.r_mass), 1.0 / b.r_mass, 1.0 / b.r_mass, -1.0 / b.r_mass;
  const Eigen::Vector2d rhs(-t_out / b.r_out - heat_kw, 0.0);
  return m.partialPivLu().solve(rhs);
}

WeatherSeries constant_weather(double t_out, int days) {
  WeatherSeries w;
  w.grid = TimeGrid::days(make_timestamp(2024, 1, 1), days);
  w.t_out.assign(w.grid.n_steps, t_out);
  w.solar.assign(w.grid.n_steps, 0.0);
  return w;
}

OccupancySchedule never_occupied() {
  OccupancySchedule s;
  s.weekday_occupied_before = 0.0;
  s.weekday_occupied_after = 24.0;
  s.weekend_occupied = false;
  return s;
}

}  // namespace

TEST_SUITE("building_sim") {

TEST_CASE("electric power examples") {
  const HeatPumpModel hp;
  CHECK(electric_power(hp, 0.0) == 0.0);
  CHECK(electric_power(hp, 0.01) == doctest::Approx(1.04).epsilon(1e-12));
  CHECK(electric_power(hp, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_THROWS_AS(electric_power(hp, 1.1), Error);
  CHECK_THROWS_AS(electric_power(hp, -0.1), Error);
}

TEST_CASE("electric power is strictly increasing with a jump at zero") {
  const HeatPumpModel hp;
  double prev = electric_power(hp, 0.0);
  CHECK(electric_power(hp, 1e-9) - prev == doctest::Approx(hp.gamma).epsilon(1e-6));
  for (int i = 1; i <= 100; ++i) {
    const double p = electric_power(hp, i / 100.0);
    REQUIRE(p > prev);
    prev = p;
  }
}

TEST_CASE("equilibrium and cooling") {
  const BuildingParams b;
  const HeatPumpModel hp;
  const PlantState eq{10.0, 10.0};
  const PlantState same = step(b, hp, eq, 0.0, 10.0, 0.0, false, 900);
  CHECK(same.t_in == 10.0);
  CHECK(same.t_mass == 10.0);
  const PlantState warm{20.0, 20.0};
  CHECK(step(b, hp, warm, 0.0, 5.0, 0.0, false, 900).t_in < 20.0);
  CHECK_THROWS_AS(step(b, hp, warm, 2.0, 5.0, 0.0, false, 900), Error);
}

TEST_CASE("free response stays within the current temperature range") {
  const BuildingParams b;
  const HeatPumpModel hp;
  for (double t_out : {-10.0, 0.0, 15.0, 30.0}) {
    for (double t_mass : {5.0, 18.0, 25.0}) {
      const PlantState s{20.0, t_mass};
      const PlantState n = step(b, hp, s, 0.0, t_out, 0.0, false, 900);
      const double lo = std::min({t_out, s.t_in, s.t_mass});
      const double hi = std::max({t_out, s.t_in, s.t_mass});
      CHECK(n.t_in >= lo);
      CHECK(n.t_in <= hi);
      CHECK(n.t_mass >= lo);
      CHECK(n.t_mass <= hi);
    }
  }
}

TEST_CASE("default parameters give a stable Euler step") {
  CHECK(euler_spectral_radius(BuildingParams{}, 900) < 1.0);
  BuildingParams fast;
  fast.c_air = 0.01;
  CHECK(euler_spectral_radius(fast, 900) > 1.0);
  CHECK_THROWS_AS(run_closed_loop(fast, HeatPumpModel{}, [](const StepContext&) { return 0.0; },
                                  constant_weather(0.0, 1), never_occupied(), PlantState{}),
                  Error);
}

TEST_CASE("constant input converges to the 2x2 steady state") {
  const BuildingParams b;
  const HeatPumpModel hp;
  const double u = 0.3;
  const double t_out = -5.0;
  const Eigen::Vector2d ss = steady_state(b, heat_delivered(hp, u), t_out);
  PlantState s{20.0, 20.0};
  for (int i = 0; i < 96 * 120; ++i) s = step(b, hp, s, u, t_out, 0.0, false, 900);
  CHECK(s.t_in == doctest::Approx(ss(0)).epsilon(1e-9));
  CHECK(s.t_mass == doctest::Approx(ss(1)).epsilon(1e-9));
}

TEST_CASE("closed loop under constant input rises monotonically toward steady state") {
  const BuildingParams b;
  const HeatPumpModel hp;
  const double u = 0.3;
  const Eigen::Vector2d ss = steady_state(b, heat_delivered(hp, u), -5.0);
  const SimTrace tr = run_closed_loop(b, hp, [u](const StepContext&) { return u; }, constant_weather(-5.0, 1),
                                      never_occupied(), PlantState{20.0, 20.0});
  for (std::size_t i = 1; i < tr.t_in.size(); ++i) {
    REQUIRE(tr.t_in[i] >= tr.t_in[i - 1]);
    REQUIRE(tr.t_in[i] < ss(0));
  }
  for (double p : tr.p_elec) CHECK(p == doctest::Approx(electric_power(hp, u)));
}

TEST_CASE("zero control gives zero power and the free response") {
  const BuildingParams b;
  const HeatPumpModel hp;
  const SimTrace tr = run_closed_loop(b, hp, [](const StepContext&) { return 0.0; }, constant_weather(0.0, 2),
                                      never_occupied(), PlantState{20.0, 20.0});
  for (double p : tr.p_elec) CHECK(p == 0.0);
  CHECK(tr.t_in.back() < tr.t_in.front());
  CHECK(tr.t_in.back() > 0.0);
}

TEST_CASE("closed loop is deterministic and propagates controller errors with the step index") {
  const BuildingParams b;
  const HeatPumpModel hp;
  const auto weather = constant_weather(2.0, 1);
  const ControlPolicy ctl = [](const StepContext& c) { return c.state.t_in < 21.0 ? 0.6 : 0.0; };
  const SimTrace a = run_closed_loop(b, hp, ctl, weather, OccupancySchedule{}, PlantState{});
  const SimTrace c = run_closed_loop(b, hp, ctl, weather, OccupancySchedule{}, PlantState{});
  CHECK(a.t_in == c.t_in);
  CHECK(a.u == c.u);
  const ControlPolicy bad = [](const StepContext& c) { return c.step == 7 ? 1.5 : 0.0; };
  try {
    run_closed_loop(b, hp, bad, weather, OccupancySchedule{}, PlantState{});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DomainError);
    CHECK(std::string(e.what()).find("step 7") != std::string::npos);
  }
}

}  // TEST_SUITE
