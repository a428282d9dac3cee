#include "hptune/kernels.hpp"

#include <exception>
#include <vector>

#include <omp.h>

#include "hptune/comfort_pmv.hpp"
#include "hptune/error.hpp"
#include "hptune/gp_regression.hpp"

namespace hptune {

int max_threads() { return omp_get_max_threads(); }

void parallel_for(int n, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(n > 0 ? n : 0);
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

PosteriorBatch posterior_batch(const GpPosterior& gp, const Eigen::MatrixXd& points) {
  const auto n = static_cast<int>(points.rows());
  PosteriorBatch out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  parallel_for(n, [&](int i) {
    const PosteriorPoint p = posterior_at(gp, points.row(i).transpose());
    out.mean(i) = p.mean;
    out.variance(i) = p.variance;
  });
  return out;
}

Eigen::VectorXd lcb_batch(const GpPosterior& gp, const Eigen::MatrixXd& points, double beta_sqrt) {
  if (!(beta_sqrt >= 0.0)) throw Error(ErrorCode::InvalidArgument, "beta_sqrt must be non-negative");
  const PosteriorBatch b = posterior_batch(gp, points);
  return b.mean - beta_sqrt * b.variance.array().sqrt().matrix();
}

std::vector<double> pmv_batch(std::span<const double> t_air, const ComfortConditions& env) {
  std::vector<double> out(t_air.size());
  parallel_for(static_cast<int>(t_air.size()), [&](int i) {
    ComfortConditions c = env;
    c.t_air = c.t_radiant = t_air[i];
    out[i] = pmv(c);
  });
  return out;
}

}  // namespace hptune
