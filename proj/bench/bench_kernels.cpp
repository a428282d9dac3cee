#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "hptune/building_sim.hpp"
#include "hptune/comfort_pmv.hpp"
#include "hptune/gp_regression.hpp"
#include "hptune/kernels.hpp"
#include "hptune/mpc_controllers.hpp"

using namespace hptune;

namespace {

GpPosterior make_gp(int n_train) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(n_train, 4);
  Eigen::VectorXd y(n_train);
  for (int i = 0; i < n_train; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = u(rng);
    y(i) = x.row(i).squaredNorm();
  }
  return fit(x, y, Kernel::isotropic(KernelKind::Matern52, 4, 0.2), 1e-6);
}

Eigen::MatrixXd make_points(int n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Eigen::MatrixXd::NullaryExpr(n, 4, [&] { return u(rng); });
}

std::vector<double> make_temps(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = 18.0 + 6.0 * i / n;
  return t;
}

// One week of rule-based control per cell.
double run_cell(int cell) {
  WeatherSeries w = synth_weather(3.0 + cell % 4, 4.0, 1.0, 200.0, cell,
                                  TimeGrid::days(make_timestamp(2024, 1, 1), 7));
  const SimTrace tr = run_closed_loop(BuildingParams{}, HeatPumpModel{},
                                      [](const StepContext& c) {
                                        return rule_based_control(c.state.t_in, c.occupied[c.step] != 0);
                                      },
                                      w, OccupancySchedule{}, PlantState{21, 21});
  double e = 0.0;
  for (double p : tr.p_elec) e += p;
  return e;
}

void BM_PosteriorSerial(benchmark::State& st) {
  const auto gp = make_gp(50);
  const auto pts = make_points(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(posterior_batch_serial(gp, pts));
}
void BM_PosteriorParallel(benchmark::State& st) {
  const auto gp = make_gp(50);
  const auto pts = make_points(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(posterior_batch(gp, pts));
}
void BM_LcbSerial(benchmark::State& st) {
  const auto gp = make_gp(50);
  const auto pts = make_points(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(lcb_batch_serial(gp, pts, 2.0));
}
void BM_LcbParallel(benchmark::State& st) {
  const auto gp = make_gp(50);
  const auto pts = make_points(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(lcb_batch(gp, pts, 2.0));
}
void BM_PmvSerial(benchmark::State& st) {
  const auto t = make_temps(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(pmv_batch_serial(t, ComfortConditions{}));
}
void BM_PmvParallel(benchmark::State& st) {
  const auto t = make_temps(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(pmv_batch(t, ComfortConditions{}));
}
void BM_CellsSerial(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  std::vector<double> out(n);
  for (auto _ : st) {
    for (int i = 0; i < n; ++i) out[i] = run_cell(i);
    benchmark::DoNotOptimize(out.data());
  }
}
void BM_CellsParallel(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  std::vector<double> out(n);
  for (auto _ : st) {
    parallel_for(n, [&](int i) { out[i] = run_cell(i); });
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_PosteriorSerial)->Arg(2304);
BENCHMARK(BM_PosteriorParallel)->Arg(2304);
BENCHMARK(BM_LcbSerial)->Arg(2304);
BENCHMARK(BM_LcbParallel)->Arg(2304);
BENCHMARK(BM_PmvSerial)->Arg(2976);
BENCHMARK(BM_PmvParallel)->Arg(2976);
BENCHMARK(BM_CellsSerial)->Arg(12);
BENCHMARK(BM_CellsParallel)->Arg(12);

BENCHMARK_MAIN();
