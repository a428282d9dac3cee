#include <doctest.h>

#include <cmath>

#include "hptune/comfort_pmv.hpp"
#include "hptune/error.hpp"
#include "oracles/pmv_fixture.hpp"

using namespace hptune;

namespace {

ComfortConditions at(double t, double clo = 1.0, double met = 1.2, double rh = 50.0, double v = 0.1) {
  ComfortConditions c;
  c.t_air = t;
  c.t_radiant = t;
  c.clo = clo;
  c.met = met;
  c.rel_humidity = rh;
  c.air_speed = v;
  return c;
}

SimTrace trace_with(const std::vector<double>& t_in, const std::vector<bool>& occupied) {
  SimTrace tr;
  const int n = static_cast<int>(t_in.size());
  tr.grid = TimeGrid(make_timestamp(2024, 1, 1), 900, n);
  tr.t_in = t_in;
  tr.u.assign(n, 0.0);
  tr.p_elec.assign(n, 0.0);
  tr.occupied = occupied;
  tr.weather.grid = tr.grid;
  tr.weather.t_out.assign(n, 0.0);
  tr.weather.solar.assign(n, 0.0);
  return tr;
}

}  // namespace

TEST_SUITE("comfort_pmv") {

TEST_CASE("reference implementation agreement") {
  const auto cases = oracle::load_pmv_reference(HPTUNE_FIXTURES "/pmv_reference.csv");
  REQUIRE(cases.size() >= 20);
  for (const auto& c : cases) {
    CAPTURE(c.t_air);
    CAPTURE(c.clo);
    CAPTURE(c.met);
    CHECK(std::abs(pmv(at(c.t_air, c.clo, c.met, c.rh, c.vr)) - c.pmv) < 0.01);
  }
}

TEST_CASE("monotone in air temperature and deterministic") {
  CHECK(pmv(at(26.0)) > pmv(at(20.0)));
  double prev = pmv(at(0.0));
  for (int i = 1; i <= 80; ++i) {
    const double v = pmv(at(i * 0.5));
    REQUIRE(v > prev);
    prev = v;
  }
  const ComfortConditions a = at(22.3), b = at(22.3);
  CHECK(pmv(a) == pmv(b));
}

TEST_CASE("invalid conditions") {
  CHECK_THROWS_AS(pmv(at(22.0, 1.0, 1.2, 120.0)), Error);
  CHECK_THROWS_AS(pmv(at(22.0, 1.0, 0.0)), Error);
  CHECK_THROWS_AS(pmv(at(22.0, -0.1)), Error);
  CHECK_THROWS_AS(pmv(at(22.0, 1.0, 1.2, 50.0, -1.0)), Error);
}

TEST_CASE("percentile examples") {
  CHECK(percentile_linear({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}, 0.8) ==
        doctest::Approx(0.82).epsilon(1e-12));
  CHECK(percentile_linear({1.0, 0.1, 0.5, 0.9, 0.3, 0.7, 0.2, 0.4, 0.8, 0.6}, 0.8) ==
        doctest::Approx(0.82).epsilon(1e-12));
  CHECK(percentile_linear({0.4}, 0.8) == 0.4);
  const ComfortStats s = comfort_from_pmv(std::vector<double>(7, -0.3));
  CHECK(s.pmv_cdf_80 == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(s.g_value == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(comfort_from_pmv({}), doctest::Contains("NoOccupiedSteps"), Error);
}

TEST_CASE("percentile is monotone under pointwise increase") {
  std::vector<double> a{0.1, 0.7, 0.3, 0.2, 0.9, 0.4};
  const double base = comfort_from_pmv(a).pmv_cdf_80;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::vector<double> b = a;
    b[i] += 0.25;
    CHECK(comfort_from_pmv(b).pmv_cdf_80 >= base);
  }
}

TEST_CASE("g sign matches the 80 percent semantics") {
  const ComfortStats good = comfort_from_pmv({0.1, 0.2, 0.3, 0.35, 0.45, 0.1, 0.2, 0.3, 0.4, 1.2});
  CHECK(good.g_value <= 0.0);
  const ComfortStats bad = comfort_from_pmv({0.1, 0.2, 0.3, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2});
  CHECK(bad.g_value > 0.0);
  CHECK(good.g_value == good.pmv_cdf_80 - 0.5);
}

TEST_CASE("trace statistics use occupied steps only") {
  const SimTrace tr = trace_with({22.0, 30.0, 22.0, 10.0}, {true, false, true, false});
  const ComfortStats s = pmv_cdf_80(tr);
  REQUIRE(s.pmv_series.size() == 2);
  CHECK(s.pmv_series[0] == pmv(at(22.0)));
  CHECK(s.pmv_cdf_80 == doctest::Approx(std::abs(pmv(at(22.0)))).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(pmv_cdf_80(trace_with({22.0, 23.0}, {false, false})), doctest::Contains("NoOccupiedSteps"),
                       Error);
}

TEST_CASE("batch equals pointwise evaluation") {
  std::vector<double> t;
  for (int i = 0; i < 500; ++i) t.push_back(15.0 + i * 0.02);
  const auto serial = pmv_batch_serial(t, ComfortConditions{});
  const auto parallel = pmv_batch(t, ComfortConditions{});
  REQUIRE(serial.size() == t.size());
  CHECK(serial == parallel);
  for (std::size_t i = 0; i < t.size(); i += 50) CHECK(serial[i] == pmv(at(t[i])));
}

}  // TEST_SUITE
