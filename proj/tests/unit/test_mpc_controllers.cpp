#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "hptune/error.hpp"
#include "hptune/mpc_controllers.hpp"

using namespace hptune;

namespace {

// y(t) = -a y(t-1) + b_u u(t-1) + b_t t_out(t-1); solar ignored.
ArxModel first_order(double a, double b_u, double b_t) {
  ArxModel m;
  m.na = 1;
  m.nb = 1;
  m.t_d = 1;
  m.a = {a};
  m.b = Eigen::MatrixXd::Zero(1, kArxInputs);
  m.b(0, 0) = b_u;
  m.b(0, 1) = b_t;
  return m;
}

Forecast flat_forecast(int n, double price, double t_out, bool occupied = true) {
  Forecast f;
  f.prices.assign(n + 1, price);
  f.t_out.assign(n + 1, t_out);
  f.solar.assign(n + 1, 0.0);
  f.occupied.assign(n + 1, occupied ? 1 : 0);
  return f;
}

MpcHistory history_for(const ArxModel& m, double y0) {
  MpcHistory h;
  h.y.assign(m.na, y0);
  h.u_past = Eigen::MatrixXd::Zero(m.past_rows() - 1, kArxInputs);
  return h;
}

MpcConfig small_config(int n) {
  MpcConfig c;
  c.horizon = n;
  return c;
}

// Heating-limited instance: the building cools toward 16 °C and must be kept above 21.5.
struct DeskInstance {
  ArxModel model;
  MpcConfig cfg;
  Forecast fc;
  MpcHistory hist;
};

DeskInstance desk_instance(unsigned seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> price(0.05, 0.5);
  DeskInstance d;
  d.model = first_order(-0.8, 6.0, 0.2);
  d.cfg = small_config(n);
  d.cfg.s_coeff = 50.0;
  d.fc = flat_forecast(n, 0.0, 0.0);
  for (auto& p : d.fc.prices) p = price(rng);
  for (int i = 0; i <= n; ++i) d.fc.occupied[i] = (i + seed) % 3 != 0;
  d.hist = history_for(d.model, 21.0);
  return d;
}

double enumerate_alpha(const QpProblem& relax, int n) {
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << n); ++mask) {
    QpProblem p = relax;
    for (int k = 0; k < n; ++k) {
      const double a = (mask >> k) & 1;
      p.lb(3 * n + k) = a;
      p.ub(3 * n + k) = a;
    }
    const QpSolution s = solve_qp(p);
    if (s.status == QpStatus::Optimal) best = std::min(best, s.objective);
  }
  return best;
}

ArxModel plant_model() {
  const WeatherSeries w = synth_weather(3.0, 4.0, 1.0, 200.0, 5, TimeGrid::days(make_timestamp(2024, 1, 1), 28));
  PrbsConfig cfg;
  cfg.seed = 8;
  const IdentificationData d =
      collect_prbs_data(BuildingParams{}, HeatPumpModel{}, w, OccupancySchedule{}, cfg, 0.05, 3, PlantState{21, 21});
  return fit_arx(d.y, d.u_arx, 4, 4, 1);
}

double tou_price(Timestamp t) {
  const double h = hour_of_day(t);
  return h >= 7 && h < 22 ? 0.35 : 0.15;
}

SimTrace closed_loop(ControllerKind kind, const ArxModel& m, const MpcConfig& cfg,
                     std::shared_ptr<std::vector<MpcStepLog>> log = nullptr, int node_limit = 20) {
  const WeatherSeries w = synth_weather(2.0, 4.0, 0.5, 200.0, 77, TimeGrid::days(make_timestamp(2024, 1, 8), 1));
  MpcPolicyOptions opt;
  opt.miqp_node_limit = node_limit;
  const ControlPolicy pol = mpc_policy(kind, m, cfg, HeatPumpModel{}, tou_price, OccupancySchedule{}, log, opt);
  return run_closed_loop(BuildingParams{}, HeatPumpModel{}, pol, w, OccupancySchedule{}, PlantState{21, 21});
}

}  // namespace

TEST_SUITE("mpc_controllers") {

TEST_CASE("warm building with positive prices needs no heating") {
  const ArxModel m = first_order(-0.5, 1.0, 0.5);
  const int n = 8;
  const QpProblem p = build_qp_mpc(m, small_config(n), flat_forecast(n, 0.3, 23.0), history_for(m, 23.0));
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  for (int k = 0; k < n; ++k) CHECK(std::abs(s.x(k)) < 1e-6);
  CHECK(std::abs(s.objective) < 1e-6);
}

TEST_CASE("single-step instance matches the hand KKT solution") {
  // y1 = 0.9·y0 + 2u = 21 + 2u; lb = 21.5 leaves a 0.5 K gap.
  const ArxModel m = first_order(-0.9, 2.0, 0.0);
  MpcConfig cfg = small_config(1);
  cfg.r_coeff = 1.0;
  cfg.s_coeff = 10.0;
  const QpProblem p = build_qp_mpc(m, cfg, flat_forecast(1, 0.2, 0.0), history_for(m, 21.0 / 0.9));
  // Stationarity of R·p·u + S·(0.5 - 2u)²: u = (0.5 - R·p/(2·S·2)) / 2.
  const double u = (0.5 - 0.2 / 40.0) / 2.0;
  const double eps = 0.5 - 2.0 * u;
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.x(0) == doctest::Approx(u).epsilon(1e-6));
  CHECK(s.x(1) == doctest::Approx(eps).epsilon(1e-5));
  CHECK(s.objective == doctest::Approx(0.2 * u + 10.0 * eps * eps).epsilon(1e-6));
}

TEST_CASE("zero slack penalty makes doing nothing optimal") {
  const ArxModel m = first_order(-0.9, 2.0, 0.0);
  MpcConfig cfg = small_config(4);
  cfg.s_coeff = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  const QpProblem p = build_qp_mpc(m, cfg, flat_forecast(4, 0.2, 0.0), history_for(m, 18.0));
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(s.x(k)) < 1e-6);
}

TEST_CASE("forecast and history checks") {
  const ArxModel m = first_order(-0.9, 2.0, 0.0);
  CHECK_THROWS_WITH_AS(build_qp_mpc(m, small_config(8), flat_forecast(4, 0.2, 0.0), history_for(m, 20.0)),
                       doctest::Contains("ForecastTooShort"), Error);
  MpcHistory h;
  h.u_past = Eigen::MatrixXd::Zero(0, kArxInputs);
  CHECK_THROWS_WITH_AS(build_qp_mpc(m, small_config(4), flat_forecast(4, 0.2, 0.0), h),
                       doctest::Contains("HistoryTooShort"), Error);
}

TEST_CASE("mask examples") {
  CHECK(apply_mask(0.05, 0.1) == 0.0);
  CHECK(apply_mask(0.1, 0.1) == 0.1);
  for (double u : {0.0, 0.001, 0.3, 1.0}) CHECK(apply_mask(u, 0.0) == u);
}

TEST_CASE("rule-based examples") {
  CHECK(rule_based_control(25.0, true) == 0.0);
  CHECK(rule_based_control(15.0, true) == 1.0);
  CHECK(rule_based_control(21.05, true) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rule_based_control(20.35, false) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("QP objective is non-increasing in u_max") {
  const DeskInstance d = desk_instance(3, 6);
  double prev = std::numeric_limits<double>::infinity();
  for (double u_max : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    MpcConfig cfg = d.cfg;
    cfg.u_max = u_max;
    const QpSolution s = solve_qp(build_qp_mpc(d.model, cfg, d.fc, d.hist));
    REQUIRE(s.status == QpStatus::Optimal);
    CHECK(s.objective <= prev + 1e-7 * (1.0 + std::abs(prev)));
    prev = s.objective;
  }
}

TEST_CASE("MIQP matches exhaustive enumeration of on/off patterns") {
  const HeatPumpModel hp;
  for (unsigned seed : {1u, 2u, 3u, 4u}) {
    const DeskInstance d = desk_instance(seed, 4);
    const QpProblem relax = build_miqp_relaxation(d.model, d.cfg, d.fc, d.hist, hp);
    const double oracle_best = enumerate_alpha(relax, 4);
    const MiqpSolution s = solve_miqp(d.model, d.cfg, d.fc, d.hist, hp, 1000);
    REQUIRE(s.completed);
    CHECK(s.objective == doctest::Approx(oracle_best).epsilon(1e-5));
    for (int k = 0; k < 4; ++k) {
      CHECK((s.alpha[k] == 0 || s.alpha[k] == 1));
      CHECK(s.u[k] >= -1e-7);
      CHECK(s.u[k] <= s.alpha[k] * d.cfg.u_max + 1e-7);
    }
  }
}

TEST_CASE("without startup power the MIQP reduces to the scaled QP") {
  HeatPumpModel hp;
  hp.gamma = 0.0;
  for (unsigned seed : {5u, 6u}) {
    const DeskInstance d = desk_instance(seed, 6);
    const MiqpSolution mi = solve_miqp(d.model, d.cfg, d.fc, d.hist, hp, 1000);
    MpcConfig scaled = d.cfg;
    scaled.r_coeff *= hp.phi;
    const QpSolution qp = solve_qp(build_qp_mpc(d.model, scaled, d.fc, d.hist));
    REQUIRE(qp.status == QpStatus::Optimal);
    CHECK(mi.objective == doctest::Approx(qp.objective).epsilon(1e-5));
  }
}

TEST_CASE("zero prices give zero MIQP objective") {
  DeskInstance d = desk_instance(9, 4);
  for (auto& p : d.fc.prices) p = 0.0;
  const MiqpSolution s = solve_miqp(d.model, d.cfg, d.fc, d.hist, HeatPumpModel{}, 1000);
  CHECK(std::abs(s.objective) < 1e-6);
}

TEST_CASE("MIQP beats the QP plan priced with the true power law") {
  const HeatPumpModel hp;
  for (unsigned seed : {11u, 12u, 13u}) {
    const DeskInstance d = desk_instance(seed, 6);
    const int n = 6;
    const QpSolution qp = solve_qp(build_qp_mpc(d.model, d.cfg, d.fc, d.hist));
    REQUIRE(qp.status == QpStatus::Optimal);
    const QpProblem relax = build_miqp_relaxation(d.model, d.cfg, d.fc, d.hist, hp);
    Eigen::VectorXd x(4 * n);
    x.head(3 * n) = qp.x.head(3 * n);
    for (int k = 0; k < n; ++k) {
      x(k) = std::max(0.0, x(k));
      x(3 * n + k) = x(k) > 0.0 ? 1.0 : 0.0;
    }
    const double true_cost = relax.objective(x);
    const MiqpSolution mi = solve_miqp(d.model, d.cfg, d.fc, d.hist, hp, 1000);
    CHECK(mi.objective <= true_cost + 1e-6);
  }
}

TEST_CASE("node limit without incumbent and infeasible relaxation") {
  const DeskInstance d = desk_instance(21, 6);
  const QpProblem relax = build_miqp_relaxation(d.model, d.cfg, d.fc, d.hist, HeatPumpModel{});
  QpProblem bad = relax;
  bad.lb(0) = 0.9;
  bad.ub(3 * 6) = 0.0;
  bad.lb(3 * 6) = 0.0;
  const QpSolver solver(bad.h_matrix, bad.a_ineq);
  CHECK_THROWS_WITH_AS(branch_and_bound(solver, bad, 6, 100), doctest::Contains("RelaxationInfeasible"), Error);
}

TEST_CASE("closed-loop policies") {
  const ArxModel m = plant_model();
  MpcConfig cfg = small_config(16);

  SUBCASE("QP equals Mask with zero threshold, and applies the first input of each solve") {
    auto log = std::make_shared<std::vector<MpcStepLog>>();
    const SimTrace qp = closed_loop(ControllerKind::QP, m, cfg, log);
    cfg.u_low = 0.0;
    const SimTrace mask = closed_loop(ControllerKind::Mask, m, cfg);
    CHECK(qp.u == mask.u);
    REQUIRE(log->size() == qp.u.size());
    for (std::size_t i = 0; i < qp.u.size(); ++i) {
      if ((*log)[i].status == "Optimal") CHECK(qp.u[i] == std::clamp((*log)[i].u_first, 0.0, 1.0));
    }
  }
  SUBCASE("Mask never emits small inputs") {
    cfg.u_low = 0.3;
    const HeatPumpModel hp;
    const SimTrace tr = closed_loop(ControllerKind::Mask, m, cfg);
    for (std::size_t i = 0; i < tr.u.size(); ++i) {
      CHECK((tr.u[i] == 0.0 || tr.u[i] >= 0.3));
      CHECK((tr.p_elec[i] == 0.0 || tr.p_elec[i] >= hp.phi * 0.3 + hp.gamma - 1e-12));
    }
  }
  SUBCASE("MIQP keeps inputs in range and logs every step") {
    cfg.horizon = 8;
    auto log = std::make_shared<std::vector<MpcStepLog>>();
    const SimTrace tr = closed_loop(ControllerKind::MIQP, m, cfg, log, 10);
    for (double u : tr.u) CHECK((u >= 0.0 && u <= 1.0));
    CHECK(log->size() == tr.u.size());
    const std::string jsonl = mpc_log_jsonl(*log);
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == static_cast<long>(tr.u.size()));
  }
}

}  // TEST_SUITE
