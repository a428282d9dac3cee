#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "hptune/error.hpp"
#include "hptune/qp_solver.hpp"
#include "oracles/qp_enumeration.hpp"
#include "oracles/random_qp.hpp"

using namespace hptune;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

QpProblem box_problem() {
  // min (x - 1)^2 = x^2 - 2x + 1, written as ½·2x² - 2x.
  QpProblem p;
  p.h_matrix = Eigen::MatrixXd::Constant(1, 1, 2.0);
  p.f_vector = Eigen::VectorXd::Constant(1, -2.0);
  p.a_ineq.resize(0, 1);
  p.b_ineq.resize(0);
  p.lb = Eigen::VectorXd::Constant(1, 0.0);
  p.ub = Eigen::VectorXd::Constant(1, 0.5);
  return p;
}

QpProblem unconstrained_problem() {
  QpProblem p;
  p.h_matrix = Eigen::MatrixXd::Identity(2, 2);
  p.f_vector = Eigen::Vector2d(-2.0, -4.0);
  p.a_ineq.resize(0, 2);
  p.b_ineq.resize(0);
  p.lb = Eigen::VectorXd::Constant(2, -kInf);
  p.ub = Eigen::VectorXd::Constant(2, kInf);
  return p;
}

}  // namespace

TEST_SUITE("qp_solver") {

TEST_CASE("clipped box example") {
  const QpProblem p = box_problem();
  const QpSolution s = solve_qp(p);
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.x(0) == doctest::Approx(0.5).epsilon(1e-6));
  // The constant 1 is outside the canonical form: (0.5 - 1)^2 = 0.25 = objective + 1.
  CHECK(s.objective + 1.0 == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("unconstrained example") {
  const QpSolution s = solve_qp(unconstrained_problem());
  REQUIRE(s.status == QpStatus::Optimal);
  CHECK(s.x(0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(s.x(1) == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("kkt residual examples") {
  const QpProblem p = box_problem();
  QpDuals d;
  d.ineq.resize(0);
  d.lower = Eigen::VectorXd::Zero(1);
  d.upper = Eigen::VectorXd::Constant(1, 1.0);  // 2·0.5 - 2 + μ_u = 0
  const Eigen::VectorXd x_opt = Eigen::VectorXd::Constant(1, 0.5);
  const KktResiduals r = kkt_residuals(p, x_opt, d);
  CHECK(r.stationarity < 1e-12);
  CHECK(r.primal_feas < 1e-12);
  CHECK(r.comp_slack < 1e-12);

  const Eigen::VectorXd x_bad = Eigen::VectorXd::Constant(1, 0.75);
  CHECK(kkt_residuals(p, x_bad, d).primal_feas == doctest::Approx(0.25).epsilon(1e-15));

  QpProblem q = unconstrained_problem();
  q.a_ineq = Eigen::RowVector2d(1.0, 1.0);
  q.b_ineq = Eigen::VectorXd::Constant(1, 10.0);
  q.lb = Eigen::Vector2d::Zero();
  q.ub = Eigen::Vector2d::Constant(5.0);
  QpDuals zero{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  const Eigen::Vector2d x(2.0, 4.0);
  const KktResiduals k = kkt_residuals(q, x, zero);
  CHECK(k.comp_slack == 0.0);
  CHECK(k.stationarity < 1e-15);
  const Eigen::Vector2d x_over(7.0, 4.0);
  CHECK(kkt_residuals(q, x_over, zero).primal_feas == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("random problems match the active-set enumeration oracle") {
  std::mt19937_64 rng(20240101);
  int compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const QpProblem p = oracle::random_qp(rng);
    const auto ref = oracle::enumerate_active_sets(p);
    REQUIRE(ref.has_value());
    const QpSolution s = solve_qp(p);
    REQUIRE(s.status == QpStatus::Optimal);
    const double scale = 1.0 + std::abs(ref->objective);
    CHECK(std::abs(s.objective - ref->objective) <= 1e-5 * scale);
    const KktResiduals r = kkt_residuals(p, s.x, s.duals);
    CHECK(r.primal_feas <= 1e-6);
    CHECK(r.stationarity <= 1e-6 * (1.0 + p.f_vector.cwiseAbs().maxCoeff()));
    CHECK(r.comp_slack <= 1e-6 * scale);
    CHECK(s.objective == doctest::Approx(p.objective(s.x)).epsilon(1e-10));
    ++compared;
  }
  CHECK(compared == 100);
}

TEST_CASE("solution is invariant under positive scaling of the cost") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    QpProblem p = oracle::random_qp(rng);
    const QpSolution base = solve_qp(p);
    REQUIRE(base.status == QpStatus::Optimal);
    for (double c : {0.01, 100.0}) {
      QpProblem q = p;
      q.h_matrix *= c;
      q.f_vector *= c;
      const QpSolution s = solve_qp(q);
      REQUIRE(s.status == QpStatus::Optimal);
      CHECK(s.objective / c == doctest::Approx(base.objective).epsilon(1e-5));
      CHECK(p.objective(s.x) <= base.objective + 1e-5 * (1.0 + std::abs(base.objective)));
    }
  }
}

TEST_CASE("deterministic iterate path") {
  std::mt19937_64 rng(11);
  const QpProblem p = oracle::random_qp(rng);
  const QpSolution a = solve_qp(p);
  const QpSolution b = solve_qp(p);
  CHECK(a.iterations == b.iterations);
  CHECK(a.x == b.x);
  CHECK(a.objective == b.objective);
}

TEST_CASE("infeasible problem is detected") {
  QpProblem p = box_problem();
  p.a_ineq = Eigen::MatrixXd::Constant(1, 1, -1.0);
  p.b_ineq = Eigen::VectorXd::Constant(1, -2.0);  // x >= 2 with x <= 0.5
  CHECK(solve_qp(p).status == QpStatus::Infeasible);
}

TEST_CASE("indefinite Hessian and malformed problems") {
  QpProblem p = unconstrained_problem();
  p.h_matrix(0, 0) = -1.0;
  CHECK_THROWS_WITH_AS(solve_qp(p), doctest::Contains("NotPsd"), Error);
  QpProblem q = unconstrained_problem();
  q.h_matrix(0, 1) = 0.5;
  CHECK_THROWS_WITH_AS(q.validate(), doctest::Contains("InvalidArgument"), Error);
  QpProblem r = box_problem();
  r.lb(0) = 1.0;
  CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("warm start from the solution converges quickly to the same point") {
  std::mt19937_64 rng(31);
  const QpProblem p = oracle::random_qp(rng);
  const QpSolver solver(p.h_matrix, p.a_ineq);
  const QpSolution cold = solver.solve(p.f_vector, p.b_ineq, p.lb, p.ub);
  REQUIRE(cold.status == QpStatus::Optimal);
  const QpWarmStart warm{cold.x, cold.y_stacked};
  const QpSolution hot = solver.solve(p.f_vector, p.b_ineq, p.lb, p.ub, &warm);
  REQUIRE(hot.status == QpStatus::Optimal);
  CHECK(hot.iterations <= cold.iterations);
  CHECK((hot.x - cold.x).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("dump round-trip") {
  std::mt19937_64 rng(3);
  const QpProblem p = oracle::random_qp(rng);
  const auto path = std::filesystem::temp_directory_path() / "hptune_qp_dump.txt";
  dump_qp(path, p);
  const QpProblem r = load_qp_dump(path);
  CHECK(r.h_matrix == p.h_matrix);
  CHECK(r.f_vector == p.f_vector);
  CHECK(r.a_ineq == p.a_ineq);
  CHECK(r.b_ineq == p.b_ineq);
  CHECK(r.lb == p.lb);
  CHECK(r.ub == p.ub);
}

}  // TEST_SUITE
