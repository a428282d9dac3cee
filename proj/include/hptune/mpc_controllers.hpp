#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hptune/building_sim.hpp"
#include "hptune/qp_solver.hpp"
#include "hptune/sysid_arx.hpp"

namespace hptune {

struct MpcConfig {
  int horizon = 48;
  double r_coeff = 1.0;
  double s_coeff = 1e4;
  double u_max = 1.0;
  double u_low = 0.0;
  double t_lb_occ = 21.5;
  double t_ub_occ = 24.0;
  double t_lb_unocc = 16.0;
  double t_ub_unocc = 24.0;

  void validate() const;
  /// Validation without the R, S > 0 guard, for degenerate desk checks.
  void validate_shape() const;
};

/// Perfect-foresight window. Entry i refers to time t0 + i; at least horizon + 1 entries
/// (prices/weather are read for i < horizon, occupancy for 1 <= i <= horizon).
struct Forecast {
  std::vector<double> prices;  // €/kWh
  std::vector<double> t_out;
  std::vector<double> solar;
  std::vector<char> occupied;
};

/// Measured past. `y` ends with the current indoor temperature y(t0);
/// `u_past` holds ARX input rows (u, t_out, solar) for t0 - past_rows() + 1 ... t0 - 1.
struct MpcHistory {
  std::vector<double> y;
  Eigen::MatrixXd u_past;
};

/// Decision layout of the QP: [u_0..u_{N-1}, eps_lo_0.., eps_hi_0..].
QpProblem build_qp_mpc(const ArxModel& model, const MpcConfig& cfg, const Forecast& fc, const MpcHistory& hist);

/// Free response F and input-to-output matrix G so that y(t0+1..t0+N) = F + G u.
struct PredictionMatrices {
  Eigen::VectorXd free_response;
  Eigen::MatrixXd input_gain;
};
PredictionMatrices prediction_matrices(const ArxModel& model, int horizon, const Forecast& fc, const MpcHistory& hist);

double apply_mask(double u_mpc, double u_low);

double rule_based_control(double t_in, bool occupied);

struct MiqpSolution {
  std::vector<double> u;
  std::vector<int> alpha;
  double objective = 0.0;
  int nodes_explored = 0;
  int qp_iterations = 0;
  bool completed = true;       // false when the node limit stopped the search
  double gap = 0.0;            // incumbent minus best open bound (0 when completed)
  QpSolution incumbent_qp;     // QP with alpha fixed at the incumbent pattern
};

/// Decision layout: [u, eps_lo, eps_hi, alpha], each a block of N.
QpProblem build_miqp_relaxation(const ArxModel& model, const MpcConfig& cfg, const Forecast& fc,
                                const MpcHistory& hist, const HeatPumpModel& hp);

MiqpSolution solve_miqp(const ArxModel& model, const MpcConfig& cfg, const Forecast& fc, const MpcHistory& hist,
                        const HeatPumpModel& hp, int node_limit = 10000);

/// Branch-and-bound over the binary block of an already built relaxation.
MiqpSolution branch_and_bound(const QpSolver& solver, const QpProblem& relaxation, int horizon, int node_limit,
                              const QpWarmStart* warm = nullptr);

enum class ControllerKind { QP, Mask, MIQP };
const char* to_string(ControllerKind kind);

struct MpcStepLog {
  int t = 0;
  std::string status;
  double u_first = 0.0;
  double objective = 0.0;
  double solve_ms = 0.0;
  bool masked = false;
  int qp_iterations = 0;  // summed over all QPs solved in this step
};

std::string mpc_log_jsonl(const std::vector<MpcStepLog>& log);

struct MpcPolicyOptions {
  int miqp_node_limit = 10000;
  QpSettings qp_settings{};
  bool warm_start = true;
};

/// Receding-horizon policy. Prices come from `price_at`; occupancy beyond the run is taken from
/// `schedule`, weather beyond the run repeats the last simulated day. `log` (optional) receives
/// one record per step.
ControlPolicy mpc_policy(ControllerKind kind, const ArxModel& model, const MpcConfig& cfg, const HeatPumpModel& hp,
                         std::function<double(Timestamp)> price_at, const OccupancySchedule& schedule,
                         std::shared_ptr<std::vector<MpcStepLog>> log = nullptr, MpcPolicyOptions options = {});

ControlPolicy rule_based_policy();

}  // namespace hptune
