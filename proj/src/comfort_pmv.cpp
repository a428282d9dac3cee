#include "hptune/comfort_pmv.hpp"

#include <algorithm>
#include <cmath>

#include "hptune/error.hpp"

namespace hptune {

void ComfortConditions::validate() const {
  if (!(rel_humidity >= 0.0 && rel_humidity <= 100.0)) throw Error(ErrorCode::InvalidArgument, "RH outside [0, 100]");
  if (!(air_speed >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative air speed");
  if (!(met > 0.0)) throw Error(ErrorCode::InvalidArgument, "met must be positive");
  if (!(clo >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative clo");
  if (!std::isfinite(t_air) || !std::isfinite(t_radiant)) throw Error(ErrorCode::InvalidArgument, "non-finite temperature");
}

double pmv(const ComfortConditions& c) {
  c.validate();
  const double ta = c.t_air;
  const double tr = c.t_radiant;
  // Saturation vapour pressure [kPa] -> partial pressure [Pa].
  const double pa = c.rel_humidity * 10.0 * std::exp(16.6536 - 4030.183 / (ta + 235.0));
  const double icl = 0.155 * c.clo;
  const double m = c.met * 58.15;
  const double w = 0.0;
  const double mw = m - w;
  const double fcl = icl <= 0.078 ? 1.0 + 1.29 * icl : 1.05 + 0.645 * icl;
  const double hcf = 12.1 * std::sqrt(c.air_speed);
  const double taa = ta + 273.0;
  const double tra = tr + 273.0;
  const double tcla = taa + (35.5 - ta) / (3.5 * icl + 0.1);

  const double p1 = icl * fcl;
  const double p2 = p1 * 3.96;
  const double p3 = p1 * 100.0;
  const double p4 = p1 * taa;
  const double p5 = 308.7 - 0.028 * mw + p2 * std::pow(tra / 100.0, 4);
  double xn = tcla / 100.0;
  double xf = tcla / 50.0;
  double hc = hcf;
  constexpr double kEps = 1e-5;
  int iterations = 0;
  while (std::abs(xn - xf) > kEps) {
    xf = (xf + xn) / 2.0;
    const double hcn = 2.38 * std::pow(std::abs(100.0 * xf - taa), 0.25);
    hc = std::max(hcf, hcn);
    xn = (p5 + p4 * hc - p2 * std::pow(xf, 4)) / (100.0 + p3 * hc);
    if (++iterations > 200) throw Error(ErrorCode::NoConvergence, "clothing temperature iteration did not converge");
  }
  const double tcl = 100.0 * xn - 273.0;

  const double hl1 = 3.05 * 0.001 * (5733.0 - 6.99 * mw - pa);
  const double hl2 = mw > 58.15 ? 0.42 * (mw - 58.15) : 0.0;
  const double hl3 = 1.7 * 0.00001 * m * (5867.0 - pa);
  const double hl4 = 0.0014 * m * (34.0 - ta);
  const double hl5 = 3.96 * fcl * (std::pow(xn, 4) - std::pow(tra / 100.0, 4));
  const double hl6 = fcl * hc * (tcl - ta);
  const double ts = 0.303 * std::exp(-0.036 * m) + 0.028;
  return ts * (mw - hl1 - hl2 - hl3 - hl4 - hl5 - hl6);
}

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of empty series");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "percentile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ComfortStats comfort_from_pmv(std::vector<double> pmv_values) {
  if (pmv_values.empty()) throw Error(ErrorCode::NoOccupiedSteps, "no occupied steps in trace");
  ComfortStats s;
  std::vector<double> abs_values(pmv_values.size());
  std::transform(pmv_values.begin(), pmv_values.end(), abs_values.begin(), [](double v) { return std::abs(v); });
  s.pmv_cdf_80 = percentile_linear(std::move(abs_values), 0.8);
  s.g_value = s.pmv_cdf_80 - 0.5;
  s.pmv_series = std::move(pmv_values);
  return s;
}

ComfortStats pmv_cdf_80(const SimTrace& trace, const ComfortConditions& env) {
  std::vector<double> occupied_t;
  for (std::size_t i = 0; i < trace.t_in.size() && i < trace.occupied.size(); ++i) {
    if (trace.occupied[i]) occupied_t.push_back(trace.t_in[i]);
  }
  if (occupied_t.empty()) throw Error(ErrorCode::NoOccupiedSteps, "no occupied steps in trace");
  return comfort_from_pmv(pmv_batch(occupied_t, env));
}

std::vector<double> pmv_batch_serial(std::span<const double> t_air, const ComfortConditions& env) {
  std::vector<double> out(t_air.size());
  ComfortConditions c = env;
  for (std::size_t i = 0; i < t_air.size(); ++i) {
    c.t_air = c.t_radiant = t_air[i];
    out[i] = pmv(c);
  }
  return out;
}

}  // namespace hptune
