#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hptune {

using Timestamp = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DDTHH:MM[:SS][Z]` (a space separator is accepted too).
Timestamp parse_timestamp(const std::string& text);
/// Formats as `YYYY-MM-DDTHH:MM:SS`.
std::string format_timestamp(Timestamp ts);

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0);

/// ISO weekday, Monday = 1 ... Sunday = 7.
unsigned iso_weekday(Timestamp ts);
/// Fractional hour of day in [0, 24).
double hour_of_day(Timestamp ts);
/// Calendar month number 1..12.
unsigned calendar_month(Timestamp ts);
int calendar_year(Timestamp ts);

struct TimeGrid {
  Timestamp start{};
  int step_seconds = 900;
  int n_steps = 0;

  TimeGrid() = default;
  TimeGrid(Timestamp start, int step_seconds, int n_steps);

  Timestamp at(int i) const { return start + std::chrono::seconds(std::int64_t{step_seconds} * i); }
  Timestamp last() const { return at(n_steps - 1); }
  double step_hours() const { return step_seconds / 3600.0; }
  int steps_per_day() const { return 86400 / step_seconds; }

  /// Grid covering `days` whole days starting at `start`.
  static TimeGrid days(Timestamp start, int days, int step_seconds = 900);

  bool operator==(const TimeGrid&) const = default;
};

struct WeatherSeries {
  TimeGrid grid;
  std::vector<double> t_out;  // °C
  std::vector<double> solar;  // W/m²

  /// Throws InvalidArgument if lengths or ranges are violated.
  void validate() const;
};

struct OccupancySchedule {
  double weekday_occupied_before = 7.0;
  double weekday_occupied_after = 20.0;
  bool weekend_occupied = true;

  void validate() const;
};

bool occupancy_at(const OccupancySchedule& schedule, Timestamp ts);

/// Closed-loop record over one grid.
struct SimTrace {
  TimeGrid grid;
  std::vector<double> t_in;
  std::vector<double> u;
  std::vector<double> p_elec;
  std::vector<bool> occupied;
  WeatherSeries weather;

  void validate() const;
};

/// Reads `timestamp,t_out_c,solar_wm2` and interpolates linearly onto `grid`.
WeatherSeries load_weather(const std::filesystem::path& path, const TimeGrid& grid);
void save_weather(const std::filesystem::path& path, const WeatherSeries& weather);

WeatherSeries synth_weather(double mean_temp, double daily_amp, double noise_std, double solar_peak,
                            std::uint64_t seed, const TimeGrid& grid);

/// `timestamp,t_in_c,u,p_elec_kw,t_out_c,solar_wm2,occupied`
void save_trace(const std::filesystem::path& path, const SimTrace& trace);
std::string trace_csv(const SimTrace& trace);

}  // namespace hptune
