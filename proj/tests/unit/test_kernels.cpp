#include <doctest.h>

#include <atomic>
#include <random>
#include <stdexcept>
#include <vector>

#include "hptune/comfort_pmv.hpp"
#include "hptune/gp_regression.hpp"
#include "hptune/kernels.hpp"

using namespace hptune;

TEST_SUITE("kernels") {

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(1000, [&](int i) { hits[i]++; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  parallel_for(0, [](int) { FAIL("no iterations expected"); });
  CHECK(max_threads() >= 1);
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  std::atomic<int> done{0};
  try {
    parallel_for(100, [&](int i) {
      done++;
      if (i == 70 || i == 30) throw std::runtime_error("index " + std::to_string(i));
    });
    FAIL("expected exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "index 30");
  }
  CHECK(done.load() == 100);
}

TEST_CASE("OpenMP batches are bit-identical to the serial references") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(40, 4, [&] { return u(rng); });
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) y(i) = x.row(i).sum();
  const GpPosterior gp = fit(x, y, Kernel::isotropic(KernelKind::Matern52, 4, 0.2), 1e-6);
  const Eigen::MatrixXd q = Eigen::MatrixXd::NullaryExpr(2304, 4, [&] { return u(rng); });
  const PosteriorBatch s = posterior_batch_serial(gp, q), p = posterior_batch(gp, q);
  CHECK(s.mean == p.mean);
  CHECK(s.variance == p.variance);
  CHECK(lcb_batch_serial(gp, q, 2.0) == lcb_batch(gp, q, 2.0));

  std::vector<double> t(2976);
  for (auto& v : t) v = 17.0 + 7.0 * u(rng);
  CHECK(pmv_batch_serial(t, ComfortConditions{}) == pmv_batch(t, ComfortConditions{}));
  CHECK(pmv_batch(std::vector<double>{}, ComfortConditions{}).empty());
}

}  // TEST_SUITE
