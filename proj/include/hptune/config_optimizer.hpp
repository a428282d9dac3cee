#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hptune/gp_regression.hpp"

namespace hptune {

enum class BetaSchedule { Constant, LogGrowth };

struct ConfigParams {
  std::vector<std::pair<double, double>> domain;  // per-dimension [lo, hi]
  BetaSchedule beta_schedule = BetaSchedule::Constant;
  double beta_sqrt_const = 2.0;
  int max_iters = 50;  // K, total evaluations including the initial design
  int n_init = 8;
  std::uint64_t seed = 0;

  KernelKind kernel = KernelKind::Matern52;
  double lengthscale = 0.2;  // in unit-box coordinates
  double noise_var = 1e-6;
  bool lengthscale_search = false;

  int n_candidates = 2048;
  int n_local = 256;
  double local_std = 0.05;

  void validate() const;
  int dim() const { return static_cast<int>(domain.size()); }
  /// β^{1/2} used when `n_obs` observations are available.
  double beta_sqrt(int n_obs) const;
};

struct EvalRecord {
  int iteration = 0;  // 1-based
  std::vector<double> theta;
  double j_value = 0.0;
  double g_value = 0.0;
  double wall_time_s = 0.0;

  bool feasible() const { return g_value <= 0.0; }
};

struct TuningResult {
  std::vector<EvalRecord> history;
  std::optional<EvalRecord> best_feasible;
  bool infeasibility_declared = false;
};

/// GP over standardized observations: y = offset + scale * z.
struct Surrogate {
  GpPosterior gp;
  double offset = 0.0;
  double scale = 1.0;

  /// Lower confidence bounds in original units at the rows of `unit_points`.
  Eigen::VectorXd lcb(const Eigen::MatrixXd& unit_points, double beta_sqrt) const;
};

Surrogate fit_surrogate(const Eigen::MatrixXd& unit_x, const Eigen::VectorXd& y, const ConfigParams& params);

/// Maps between the domain box and [0, 1]^d.
Eigen::VectorXd to_unit(const ConfigParams& params, const std::vector<double>& theta);
std::vector<double> from_unit(const ConfigParams& params, const Eigen::Ref<const Eigen::VectorXd>& u);

/// Shifted Halton points plus Gaussian perturbations around `incumbent` (unit coordinates).
Eigen::MatrixXd candidate_set(const ConfigParams& params, int iteration, const Eigen::VectorXd* incumbent);

/// Latin-hypercube design in the unit box.
Eigen::MatrixXd latin_hypercube(int n, int dim, std::uint64_t seed);

/// True iff some candidate has constraint LCB <= 0.
bool check_feasibility(const Surrogate& g, const Eigen::MatrixXd& candidates, double beta_sqrt);

/// Index of the candidate minimizing the objective LCB among those with constraint LCB <= 0
/// (smallest index on ties). Throws NoFeasibleCandidate.
int propose_next(const Surrogate& j, const Surrogate& g, const Eigen::MatrixXd& candidates, double beta_sqrt);

struct BlackboxValue {
  double j = 0.0;
  double g = 0.0;
};
using Blackbox = std::function<BlackboxValue(const std::vector<double>& theta)>;

struct RunOptions {
  /// Records to replay instead of evaluating (resume); must match the deterministic proposals.
  std::vector<EvalRecord> resume;
  std::function<void(const EvalRecord&)> on_record;
};

TuningResult run_config(const Blackbox& blackbox, const ConfigParams& params, const RunOptions& options = {});

/// `{k, theta, j_eur, g, feasible, wall_s}`
std::string record_to_json(const EvalRecord& r);
EvalRecord record_from_json(const std::string& line);
std::vector<EvalRecord> read_run_log(const std::filesystem::path& path);

}  // namespace hptune
