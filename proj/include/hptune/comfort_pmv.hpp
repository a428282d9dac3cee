#pragma once

#include <span>
#include <vector>

#include "hptune/core_model.hpp"

namespace hptune {

struct ComfortConditions {
  double t_air = 22.0;         // °C
  double t_radiant = 22.0;     // °C
  double rel_humidity = 50.0;  // %
  double air_speed = 0.1;      // m/s
  double met = 1.2;
  double clo = 1.0;

  void validate() const;
};

/// Fanger predicted mean vote (ISO 7730), unclamped.
double pmv(const ComfortConditions& c);

/// Linear interpolation between closest ranks: h = (n - 1) p.
double percentile_linear(std::vector<double> values, double p);

struct ComfortStats {
  std::vector<double> pmv_series;  // one entry per occupied step
  double pmv_cdf_80 = 0.0;         // 80th percentile of |PMV|
  double g_value = 0.0;            // pmv_cdf_80 - 0.5
};

/// Comfort statistics from precomputed occupied-step PMV values.
ComfortStats comfort_from_pmv(std::vector<double> pmv_values);

/// Uses the trace indoor temperature as both air and radiant temperature.
ComfortStats pmv_cdf_80(const SimTrace& trace, const ComfortConditions& env = {});

/// Batch PMV over air temperatures (radiant = air), serial and OpenMP variants.
std::vector<double> pmv_batch_serial(std::span<const double> t_air, const ComfortConditions& env);
std::vector<double> pmv_batch(std::span<const double> t_air, const ComfortConditions& env);

}  // namespace hptune
