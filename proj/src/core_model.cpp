#include "hptune/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "hptune/error.hpp"

namespace hptune {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::CoverageGap: return "CoverageGap";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::UnstableModel: return "UnstableModel";
    case ErrorCode::HistoryTooShort: return "HistoryTooShort";
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::ForecastTooShort: return "ForecastTooShort";
    case ErrorCode::NodeLimitHit: return "NodeLimitHit";
    case ErrorCode::RelaxationInfeasible: return "RelaxationInfeasible";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NoOccupiedSteps: return "NoOccupiedSteps";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SpanMismatch: return "SpanMismatch";
    case ErrorCode::MissingMonthPrice: return "MissingMonthPrice";
    case ErrorCode::DuplicateCode: return "DuplicateCode";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::CholeskyFailure: return "CholeskyFailure";
    case ErrorCode::NegativeVariance: return "NegativeVariance";
    case ErrorCode::NoFeasibleCandidate: return "NoFeasibleCandidate";
    case ErrorCode::BlackboxFailure: return "BlackboxFailure";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

using namespace std::chrono;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& text, const std::string& context) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad number '" + text + "' in " + context);
  }
}

std::string fmt_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Timestamp parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int fields = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
  if (fields < 6 || (sep != 'T' && sep != ' ')) {
    throw Error(ErrorCode::ParseError, "bad timestamp '" + text + "'");
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) {
    throw Error(ErrorCode::ParseError, "bad timestamp '" + text + "'");
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_timestamp(Timestamp ts) {
  const auto day_start = floor<days>(ts);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{ts - day_start};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

Timestamp make_timestamp(int y, unsigned m, unsigned d, int h, int mi) {
  return sys_days{year{y} / month{m} / day{d}} + hours{h} + minutes{mi};
}

unsigned iso_weekday(Timestamp ts) { return weekday{floor<days>(ts)}.iso_encoding(); }

double hour_of_day(Timestamp ts) {
  return static_cast<double>((ts - floor<days>(ts)).count()) / 3600.0;
}

unsigned calendar_month(Timestamp ts) {
  return static_cast<unsigned>(year_month_day{floor<days>(ts)}.month());
}

int calendar_year(Timestamp ts) { return static_cast<int>(year_month_day{floor<days>(ts)}.year()); }

TimeGrid::TimeGrid(Timestamp start_, int step_seconds_, int n_steps_)
    : start(start_), step_seconds(step_seconds_), n_steps(n_steps_) {
  if (step_seconds <= 0 || n_steps <= 0 || 3600 % step_seconds != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "TimeGrid needs step_seconds > 0 dividing 3600 and n_steps > 0");
  }
}

TimeGrid TimeGrid::days(Timestamp start, int n_days, int step_seconds) {
  return TimeGrid(start, step_seconds, n_days * (86400 / step_seconds));
}

void WeatherSeries::validate() const {
  const auto n = static_cast<std::size_t>(grid.n_steps);
  if (t_out.size() != n || solar.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "weather series length differs from grid");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(t_out[i] >= -40.0 && t_out[i] <= 50.0)) {
      throw Error(ErrorCode::InvalidArgument, "t_out out of [-40, 50] at step " + std::to_string(i));
    }
    if (!(solar[i] >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "negative solar at step " + std::to_string(i));
    }
  }
}

void OccupancySchedule::validate() const {
  auto in_day = [](double h) { return h >= 0.0 && h <= 24.0; };
  if (!in_day(weekday_occupied_before) || !in_day(weekday_occupied_after) ||
      !(weekday_occupied_before < weekday_occupied_after)) {
    throw Error(ErrorCode::InvalidArgument, "occupancy hours must satisfy 0 <= before < after <= 24");
  }
}

bool occupancy_at(const OccupancySchedule& schedule, Timestamp ts) {
  const bool weekend = iso_weekday(ts) >= 6;
  if (weekend) return schedule.weekend_occupied;
  const double h = hour_of_day(ts);
  return h < schedule.weekday_occupied_before || h >= schedule.weekday_occupied_after;
}

void SimTrace::validate() const {
  const auto n = static_cast<std::size_t>(grid.n_steps);
  if (t_in.size() != n || u.size() != n || p_elec.size() != n || occupied.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "trace series length differs from grid");
  }
  weather.validate();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(u[i] >= 0.0 && u[i] <= 1.0) || !(p_elec[i] >= 0.0) || ((p_elec[i] == 0.0) != (u[i] == 0.0))) {
      throw Error(ErrorCode::InvalidArgument, "trace input/power invariant broken at step " + std::to_string(i));
    }
  }
}

WeatherSeries load_weather(const std::filesystem::path& path, const TimeGrid& grid) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open weather file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty weather file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, "weather CSV lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_ts = column("timestamp");
  const std::size_t c_t = column("t_out_c");
  const std::size_t c_s = column("solar_wm2");

  std::vector<std::int64_t> times;
  std::vector<double> t_vals, s_vals;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::size_t need = std::max({c_ts, c_t, c_s}) + 1;
    if (cells.size() < need) {
      throw Error(ErrorCode::ParseError, "short row at line " + std::to_string(line_no));
    }
    const auto ctx = "line " + std::to_string(line_no);
    const std::int64_t t = parse_timestamp(cells[c_ts]).time_since_epoch().count();
    if (!times.empty() && t <= times.back()) {
      throw Error(ErrorCode::ParseError, "timestamps not strictly increasing at " + ctx);
    }
    times.push_back(t);
    t_vals.push_back(parse_double(cells[c_t], ctx));
    s_vals.push_back(parse_double(cells[c_s], ctx));
  }
  if (times.empty()) throw Error(ErrorCode::CoverageGap, "weather CSV has no rows");

  const std::int64_t first = grid.start.time_since_epoch().count();
  const std::int64_t last = grid.last().time_since_epoch().count();
  if (times.front() > first || times.back() < last) {
    throw Error(ErrorCode::CoverageGap, "weather CSV does not span " + format_timestamp(grid.start) +
                                            " .. " + format_timestamp(grid.last()));
  }

  WeatherSeries w{grid, {}, {}};
  w.t_out.resize(grid.n_steps);
  w.solar.resize(grid.n_steps);
  std::size_t j = 0;
  for (int i = 0; i < grid.n_steps; ++i) {
    const std::int64_t t = grid.at(i).time_since_epoch().count();
    while (j + 1 < times.size() && times[j + 1] <= t) ++j;
    if (times[j] == t || j + 1 == times.size()) {
      w.t_out[i] = t_vals[j];
      w.solar[i] = s_vals[j];
    } else {
      const double frac = static_cast<double>(t - times[j]) / static_cast<double>(times[j + 1] - times[j]);
      w.t_out[i] = t_vals[j] + frac * (t_vals[j + 1] - t_vals[j]);
      w.solar[i] = s_vals[j] + frac * (s_vals[j + 1] - s_vals[j]);
    }
  }
  w.validate();
  return w;
}

void save_weather(const std::filesystem::path& path, const WeatherSeries& weather) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "timestamp,t_out_c,solar_wm2\n";
  for (int i = 0; i < weather.grid.n_steps; ++i) {
    out << format_timestamp(weather.grid.at(i)) << ',' << fmt_exact(weather.t_out[i]) << ','
        << fmt_exact(weather.solar[i]) << '\n';
  }
}

WeatherSeries synth_weather(double mean_temp, double daily_amp, double noise_std, double solar_peak,
                            std::uint64_t seed, const TimeGrid& grid) {
  if (daily_amp < 0.0 || noise_std < 0.0 || solar_peak < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "synth_weather needs non-negative amplitude, noise and solar peak");
  }
  constexpr double pi = std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  WeatherSeries w{grid, std::vector<double>(grid.n_steps), std::vector<double>(grid.n_steps)};
  for (int i = 0; i < grid.n_steps; ++i) {
    const double h = hour_of_day(grid.at(i));
    double t = mean_temp + daily_amp * std::sin(2.0 * pi * h / 24.0 - pi / 2.0);
    if (noise_std > 0.0) t += noise_std * noise(rng);
    w.t_out[i] = std::clamp(t, -40.0, 50.0);
    w.solar[i] = (h >= 8.0 && h <= 17.0) ? solar_peak * std::sin(pi * (h - 8.0) / 9.0) : 0.0;
    if (w.solar[i] < 0.0) w.solar[i] = 0.0;
  }
  return w;
}

std::string trace_csv(const SimTrace& trace) {
  std::ostringstream out;
  out << "timestamp,t_in_c,u,p_elec_kw,t_out_c,solar_wm2,occupied\n";
  char buf[160];
  for (int i = 0; i < trace.grid.n_steps; ++i) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f,%.6f,%d\n", trace.t_in[i], trace.u[i], trace.p_elec[i],
                  trace.weather.t_out[i], trace.weather.solar[i], trace.occupied[i] ? 1 : 0);
    out << format_timestamp(trace.grid.at(i)) << buf;
  }
  return out.str();
}

void save_trace(const std::filesystem::path& path, const SimTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << trace_csv(trace);
}

}  // namespace hptune
