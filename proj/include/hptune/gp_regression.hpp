#pragma once

#include <vector>

#include <Eigen/Dense>

namespace hptune {

enum class KernelKind { SquaredExponential, Matern52 };

struct Kernel {
  KernelKind kind = KernelKind::Matern52;
  Eigen::VectorXd lengthscales = Eigen::VectorXd::Constant(1, 0.2);
  double variance = 1.0;

  /// Kernel with the same lengthscale on every one of `dim` inputs.
  static Kernel isotropic(KernelKind kind, int dim, double lengthscale, double variance = 1.0);

  void validate() const;
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const;
  /// Gram matrix between the rows of `a` and the rows of `b`.
  Eigen::MatrixXd gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;
};

struct GpPosterior {
  Kernel kernel;
  Eigen::MatrixXd train_x;  // k x d, one point per row
  Eigen::VectorXd train_y;
  double noise_var = 1e-6;
  double jitter = 0.0;      // extra diagonal added by Cholesky retries
  Eigen::MatrixXd chol;     // lower factor of K + (noise_var + jitter) I
  Eigen::VectorXd alpha;    // (K + λI)^{-1} y

  int size() const { return static_cast<int>(train_y.size()); }
  int dim() const { return static_cast<int>(kernel.lengthscales.size()); }
};

GpPosterior fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Kernel& kernel, double noise_var);

struct PosteriorPoint {
  double mean = 0.0;
  double variance = 0.0;
};

PosteriorPoint posterior_at(const GpPosterior& gp, const Eigen::Ref<const Eigen::VectorXd>& theta);

double lcb(const GpPosterior& gp, const Eigen::Ref<const Eigen::VectorXd>& theta, double beta_sqrt);

/// Log marginal likelihood of the training data under the fitted kernel.
double log_marginal_likelihood(const GpPosterior& gp);

/// Optional refinement: picks the isotropic lengthscale from `grid` maximizing the marginal likelihood.
GpPosterior fit_with_lengthscale_search(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Kernel& kernel,
                                        double noise_var, const std::vector<double>& grid);

/// Posterior over the rows of `points`, serial reference and OpenMP variant.
struct PosteriorBatch {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};
PosteriorBatch posterior_batch_serial(const GpPosterior& gp, const Eigen::MatrixXd& points);
PosteriorBatch posterior_batch(const GpPosterior& gp, const Eigen::MatrixXd& points);

Eigen::VectorXd lcb_batch_serial(const GpPosterior& gp, const Eigen::MatrixXd& points, double beta_sqrt);
Eigen::VectorXd lcb_batch(const GpPosterior& gp, const Eigen::MatrixXd& points, double beta_sqrt);

}  // namespace hptune
