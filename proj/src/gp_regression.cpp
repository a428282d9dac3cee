#include "hptune/gp_regression.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hptune/error.hpp"

namespace hptune {

namespace {

constexpr int kCholeskyRetries = 3;
constexpr double kVarianceTol = 1e-10;

}  // namespace

Kernel Kernel::isotropic(KernelKind kind, int dim, double lengthscale, double variance) {
  Kernel k;
  k.kind = kind;
  k.lengthscales = Eigen::VectorXd::Constant(dim, lengthscale);
  k.variance = variance;
  k.validate();
  return k;
}

void Kernel::validate() const {
  if (lengthscales.size() == 0 || !(lengthscales.array() > 0.0).all()) {
    throw Error(ErrorCode::InvalidArgument, "kernel lengthscales must be positive");
  }
  if (!(variance > 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel variance must be positive");
}

double Kernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const {
  const double r2 = ((a - b).array() / lengthscales.array()).square().sum();
  if (kind == KernelKind::SquaredExponential) return variance * std::exp(-0.5 * r2);
  const double r = std::sqrt(5.0 * r2);
  return variance * (1.0 + r + r * r / 3.0) * std::exp(-r);
}

Eigen::MatrixXd Kernel::gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = (*this)(a.row(i).transpose(), b.row(j).transpose());
  }
  return k;
}

GpPosterior fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Kernel& kernel, double noise_var) {
  kernel.validate();
  if (!(noise_var > 0.0)) throw Error(ErrorCode::InvalidArgument, "noise variance must be positive");
  if (x.rows() != y.size()) throw Error(ErrorCode::InvalidArgument, "x rows != y length");
  if (x.rows() > 0 && x.cols() != kernel.lengthscales.size()) {
    throw Error(ErrorCode::InvalidArgument, "x columns != kernel dimension");
  }
  if (!x.allFinite() || !y.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite training data");

  GpPosterior gp;
  gp.kernel = kernel;
  gp.train_x = x;
  gp.train_y = y;
  gp.noise_var = noise_var;
  if (x.rows() == 0) {
    gp.train_x.resize(0, kernel.lengthscales.size());
    return gp;
  }

  const Eigen::MatrixXd k = kernel.gram(x, x);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= kCholeskyRetries; ++attempt) {
    Eigen::MatrixXd kn = k;
    kn.diagonal().array() += noise_var + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kn);
    if (llt.info() == Eigen::Success) {
      gp.jitter = jitter;
      gp.chol = llt.matrixL();
      gp.alpha = llt.solve(y);
      return gp;
    }
    jitter = jitter == 0.0 ? 10.0 * noise_var : 10.0 * jitter;
  }
  throw Error(ErrorCode::CholeskyFailure, "K + λI is not numerically positive definite");
}

PosteriorPoint posterior_at(const GpPosterior& gp, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != gp.dim()) throw Error(ErrorCode::InvalidArgument, "query dimension mismatch");
  const double prior = gp.kernel(theta, theta);
  if (gp.size() == 0) return {0.0, prior};
  Eigen::VectorXd kv(gp.size());
  for (int i = 0; i < gp.size(); ++i) kv(i) = gp.kernel(gp.train_x.row(i).transpose(), theta);
  const double mean = kv.dot(gp.alpha);
  const Eigen::VectorXd v = gp.chol.triangularView<Eigen::Lower>().solve(kv);
  double var = prior - v.squaredNorm();
  if (var < 0.0) {
    if (var < -kVarianceTol * std::max(1.0, gp.kernel.variance)) {
      throw Error(ErrorCode::NegativeVariance, "posterior variance " + std::to_string(var));
    }
    var = 0.0;
  }
  return {mean, var};
}

double lcb(const GpPosterior& gp, const Eigen::Ref<const Eigen::VectorXd>& theta, double beta_sqrt) {
  if (!(beta_sqrt >= 0.0)) throw Error(ErrorCode::InvalidArgument, "beta_sqrt must be non-negative");
  const PosteriorPoint p = posterior_at(gp, theta);
  return p.mean - beta_sqrt * std::sqrt(p.variance);
}

double log_marginal_likelihood(const GpPosterior& gp) {
  if (gp.size() == 0) return 0.0;
  const double n = gp.size();
  return -0.5 * gp.train_y.dot(gp.alpha) - gp.chol.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

GpPosterior fit_with_lengthscale_search(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Kernel& kernel,
                                        double noise_var, const std::vector<double>& grid) {
  if (grid.empty()) return fit(x, y, kernel, noise_var);
  GpPosterior best;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (double ell : grid) {
    Kernel k = kernel;
    k.lengthscales.setConstant(ell);
    GpPosterior gp = fit(x, y, k, noise_var);
    const double lml = log_marginal_likelihood(gp);
    if (lml > best_lml) {
      best_lml = lml;
      best = std::move(gp);
    }
  }
  return best;
}

PosteriorBatch posterior_batch_serial(const GpPosterior& gp, const Eigen::MatrixXd& points) {
  PosteriorBatch out{Eigen::VectorXd(points.rows()), Eigen::VectorXd(points.rows())};
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const PosteriorPoint p = posterior_at(gp, points.row(i).transpose());
    out.mean(i) = p.mean;
    out.variance(i) = p.variance;
  }
  return out;
}

Eigen::VectorXd lcb_batch_serial(const GpPosterior& gp, const Eigen::MatrixXd& points, double beta_sqrt) {
  if (!(beta_sqrt >= 0.0)) throw Error(ErrorCode::InvalidArgument, "beta_sqrt must be non-negative");
  const PosteriorBatch b = posterior_batch_serial(gp, points);
  return b.mean - beta_sqrt * b.variance.array().sqrt().matrix();
}

}  // namespace hptune
