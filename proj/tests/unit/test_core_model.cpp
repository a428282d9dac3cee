#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hptune/core_model.hpp"
#include "hptune/error.hpp"

using namespace hptune;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "hptune_core_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << content;
  return p;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an hptune::Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_SUITE("core_model") {

TEST_CASE("time grid invariants") {
  const Timestamp t0 = make_timestamp(2024, 1, 1);
  CHECK(TimeGrid(t0, 900, 4).last() == make_timestamp(2024, 1, 1, 0, 45));
  CHECK(TimeGrid::days(t0, 2).n_steps == 192);
  CHECK(code_of([&] { TimeGrid(t0, 0, 4); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { TimeGrid(t0, 900, 0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { TimeGrid(t0, 700, 4); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("timestamps round-trip and calendar helpers") {
  const Timestamp t = parse_timestamp("2023-11-01T06:30:00");
  CHECK(format_timestamp(t) == "2023-11-01T06:30:00");
  CHECK(parse_timestamp("2023-11-01 06:30") == t);
  CHECK(iso_weekday(t) == 3);
  CHECK(hour_of_day(t) == doctest::Approx(6.5));
  CHECK(calendar_month(t) == 11);
  CHECK(iso_weekday(make_timestamp(2024, 1, 1)) == 1);
  CHECK(code_of([] { parse_timestamp("yesterday"); }) == ErrorCode::ParseError);
}

TEST_CASE("occupancy examples") {
  const OccupancySchedule s;
  // 2024-01-02 is a Tuesday, 2024-01-06 a Saturday.
  CHECK(occupancy_at(s, make_timestamp(2024, 1, 2, 6, 30)));
  CHECK_FALSE(occupancy_at(s, make_timestamp(2024, 1, 2, 12, 0)));
  CHECK(occupancy_at(s, make_timestamp(2024, 1, 6, 12, 0)));
  CHECK(occupancy_at(s, make_timestamp(2024, 1, 2, 20, 0)));
  CHECK_FALSE(occupancy_at(s, make_timestamp(2024, 1, 2, 7, 0)));
}

TEST_CASE("occupancy is weekly periodic") {
  const OccupancySchedule s;
  const TimeGrid g = TimeGrid::days(make_timestamp(2023, 11, 1), 14);
  for (int i = 0; i + 7 * 96 < g.n_steps; ++i) {
    REQUIRE(occupancy_at(s, g.at(i)) == occupancy_at(s, g.at(i + 7 * 96)));
  }
}

TEST_CASE("load_weather interpolation and errors") {
  const TimeGrid grid(make_timestamp(2024, 1, 1), 900, 5);
  SUBCASE("constant") {
    const auto p = temp_file("const.csv", "timestamp,t_out_c,solar_wm2\n2024-01-01T00:00:00,5,0\n2024-01-01T02:00:00,5,0\n");
    const WeatherSeries w = load_weather(p, grid);
    for (double v : w.t_out) CHECK(v == 5.0);
  }
  SUBCASE("linear in time") {
    const auto p = temp_file("lin.csv", "timestamp,t_out_c,solar_wm2\n2024-01-01T00:00:00,0,0\n2024-01-01T01:00:00,4,100\n");
    const WeatherSeries w = load_weather(p, grid);
    CHECK(w.t_out[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.solar[2] == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(w.t_out[4] == 4.0);
  }
  SUBCASE("coverage gap") {
    const auto p = temp_file("gap.csv", "timestamp,t_out_c,solar_wm2\n2024-01-01T00:00:00,0,0\n2024-01-01T00:30:00,4,0\n");
    CHECK(code_of([&] { load_weather(p, grid); }) == ErrorCode::CoverageGap);
  }
  SUBCASE("missing column") {
    const auto p = temp_file("col.csv", "timestamp,t_out_c\n2024-01-01T00:00:00,0\n");
    CHECK(code_of([&] { load_weather(p, grid); }) == ErrorCode::MissingColumn);
  }
  SUBCASE("bad number") {
    const auto p = temp_file("num.csv", "timestamp,t_out_c,solar_wm2\n2024-01-01T00:00:00,abc,0\n");
    CHECK(code_of([&] { load_weather(p, grid); }) == ErrorCode::ParseError);
  }
}

TEST_CASE("synth_weather examples") {
  const TimeGrid grid = TimeGrid::days(make_timestamp(2024, 1, 1), 2);
  const WeatherSeries flat = synth_weather(3.0, 0.0, 0.0, 200.0, 1, grid);
  for (double v : flat.t_out) CHECK(v == 3.0);
  CHECK(flat.solar[8] == 0.0);  // 02:00
  CHECK(flat.solar[50] > 0.0);  // 12:30
  const WeatherSeries a = synth_weather(3.0, 4.0, 1.0, 200.0, 42, grid);
  const WeatherSeries b = synth_weather(3.0, 4.0, 1.0, 200.0, 42, grid);
  CHECK(a.t_out == b.t_out);
  CHECK(a.solar == b.solar);
  CHECK(code_of([&] { synth_weather(3.0, -1.0, 0.0, 0.0, 1, grid); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("synth_weather is invariant under whole-day translation without noise") {
  const WeatherSeries a = synth_weather(3.0, 4.0, 0.0, 200.0, 1, TimeGrid::days(make_timestamp(2024, 1, 1), 1));
  const WeatherSeries b = synth_weather(3.0, 4.0, 0.0, 200.0, 9, TimeGrid::days(make_timestamp(2024, 1, 4), 1));
  CHECK(a.t_out == b.t_out);
  CHECK(a.solar == b.solar);
}

TEST_CASE("weather export then load is idempotent on the grid") {
  const TimeGrid grid = TimeGrid::days(make_timestamp(2023, 12, 1), 1);
  const WeatherSeries w = synth_weather(4.0, 4.0, 1.0, 150.0, 7, grid);
  const fs::path p = fs::temp_directory_path() / "hptune_core_tests" / "roundtrip.csv";
  fs::create_directories(p.parent_path());
  save_weather(p, w);
  const WeatherSeries r = load_weather(p, grid);
  CHECK(r.t_out == w.t_out);
  CHECK(r.solar == w.solar);
  save_weather(p, r);
  CHECK(load_weather(p, grid).t_out == w.t_out);
}

}  // TEST_SUITE
