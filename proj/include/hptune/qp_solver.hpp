#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace hptune {

/// min ½ xᵀHx + fᵀx  s.t.  A x ≤ b,  lb ≤ x ≤ ub   (infinite bounds allowed)
struct QpProblem {
  Eigen::MatrixXd h_matrix;
  Eigen::VectorXd f_vector;
  Eigen::MatrixXd a_ineq;  // m x n, m may be 0
  Eigen::VectorXd b_ineq;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  Eigen::Index num_vars() const { return f_vector.size(); }
  Eigen::Index num_ineq() const { return b_ineq.size(); }

  /// Dimension, symmetry and bound-order checks; throws InvalidArgument.
  void validate() const;
  double objective(const Eigen::VectorXd& x) const;
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

const char* to_string(QpStatus status);

/// Non-negative multipliers: `ineq` for A x ≤ b, `lower`/`upper` for the bounds.
struct QpDuals {
  Eigen::VectorXd ineq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct QpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  QpStatus status = QpStatus::MaxIter;
  int iterations = 0;
  bool polished = false;
  QpDuals duals;
  /// Raw splitting duals over the stacked rows [A; I]; feed back as a warm start.
  Eigen::VectorXd y_stacked;
};

struct KktResiduals {
  double stationarity = 0.0;  // ‖Hx + f + Aᵀλ − μ_l + μ_u‖∞
  double primal_feas = 0.0;   // largest bound/inequality violation
  double comp_slack = 0.0;    // largest |multiplier × slack|
};

KktResiduals kkt_residuals(const QpProblem& p, const Eigen::VectorXd& x, const QpDuals& duals);

struct QpSettings {
  double tol = 1e-6;
  int max_iter = 20000;
  double rho = 1.0;
  double sigma = 1e-6;
  double alpha = 1.6;             // over-relaxation
  double regularization = 1e-8;   // added to the diagonal of H
  double eps_infeasible = 1e-4;   // certificate tolerance
  int check_every = 10;
  int ruiz_iterations = 10;
  bool polish = true;
  double polish_trigger = 1e-1;  // relative splitting residual at which the first polish is tried
  int polish_rounds = 50;        // active-set corrections per polish attempt
  int early_polish_rounds = 50;  // same, while the splitting residuals are still coarse
};

/// Starting point in the original (unscaled) variables.
struct QpWarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd y_stacked;  // optional; empty means zero duals
};

/// Operator-splitting solver with the matrix part (H, A) fixed at construction so that
/// problems differing only in f, b and bounds reuse one scaling and one factorization.
class QpSolver {
 public:
  QpSolver(const Eigen::MatrixXd& h_matrix, const Eigen::MatrixXd& a_ineq, QpSettings settings = {});

  QpSolution solve(const Eigen::VectorXd& f, const Eigen::VectorXd& b, const Eigen::VectorXd& lb,
                   const Eigen::VectorXd& ub, const QpWarmStart* warm = nullptr) const;

  const QpSettings& settings() const { return settings_; }
  Eigen::Index num_vars() const { return n_; }
  Eigen::Index num_ineq() const { return m_; }

 private:
  /// Active-set guess per stacked row: 1 upper, -1 lower, 0 inactive.
  std::vector<signed char> guess_active(const Eigen::VectorXd& z_bar, const Eigen::VectorXd& y_bar,
                                        const Eigen::VectorXd& l_bar, const Eigen::VectorXd& u_bar) const;
  std::optional<QpSolution> try_polish(const QpProblem& p, std::vector<signed char> state,
                                       const Eigen::VectorXd& l_bar, const Eigen::VectorXd& u_bar,
                                       int max_rounds) const;
  QpDuals unscale_duals(const Eigen::VectorXd& y_bar, const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) const;
  /// Substitutes variables with lb == ub and solves the remaining problem.
  QpSolution solve_reduced(const QpProblem& p, const std::vector<Eigen::Index>& free_vars,
                           const QpWarmStart* warm) const;

  QpSettings settings_;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  Eigen::MatrixXd h_;          // original
  Eigen::MatrixXd a_;          // original
  Eigen::MatrixXd h_bar_;      // c·D H D
  Eigen::MatrixXd a_bar_;      // E_A A D
  Eigen::VectorXd bound_diag_; // E_B D (diagonal of the scaled identity block)
  Eigen::VectorXd d_;          // variable scaling
  Eigen::VectorXd e_;          // row scaling, m + n
  double cost_scale_ = 1.0;
  Eigen::LLT<Eigen::MatrixXd> kkt_;
};

/// One-shot convenience wrapper around QpSolver.
QpSolution solve_qp(const QpProblem& p, double tol = 1e-6, int max_iter = 20000);

/// Plain-text dump: dimensions line then H, f, A, b, lb, ub in row-major decimal.
void dump_qp(const std::filesystem::path& path, const QpProblem& p);
QpProblem load_qp_dump(const std::filesystem::path& path);

}  // namespace hptune
