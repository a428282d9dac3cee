#include "hptune/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hptune/error.hpp"

namespace hptune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

double clamp_norm(double v) { return std::clamp(v, 1e-4, 1e4); }

// Minimum number of iterations between two polish attempts.
constexpr int kPolishSpacing = 50;

// Splitting residual below which a polish attempt gets the full number of correction rounds.
constexpr double kTightPolish = 1e-3;

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::MaxIter: return "MaxIter";
  }
  return "Unknown";
}

void QpProblem::validate() const {
  const Eigen::Index n = f_vector.size();
  if (h_matrix.rows() != n || h_matrix.cols() != n || lb.size() != n || ub.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "QP cost/bound dimensions inconsistent");
  }
  if (a_ineq.rows() != b_ineq.size() || (a_ineq.rows() > 0 && a_ineq.cols() != n)) {
    throw Error(ErrorCode::InvalidArgument, "QP inequality dimensions inconsistent");
  }
  if (n > 0 && (h_matrix - h_matrix.transpose()).lpNorm<Eigen::Infinity>() > 1e-10) {
    throw Error(ErrorCode::InvalidArgument, "H must be symmetric");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(lb(i) <= ub(i))) throw Error(ErrorCode::InvalidArgument, "lb > ub");
  }
}

double QpProblem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(h_matrix * x) + f_vector.dot(x);
}

KktResiduals kkt_residuals(const QpProblem& p, const Eigen::VectorXd& x, const QpDuals& duals) {
  KktResiduals r;
  const Eigen::Index n = p.num_vars();
  const Eigen::Index m = p.num_ineq();

  Eigen::VectorXd grad = p.h_matrix * x + p.f_vector - duals.lower + duals.upper;
  if (m > 0) grad += p.a_ineq.transpose() * duals.ineq;
  r.stationarity = inf_norm(grad);

  Eigen::VectorXd slack_ineq;
  if (m > 0) slack_ineq = p.b_ineq - p.a_ineq * x;
  for (Eigen::Index i = 0; i < m; ++i) {
    r.primal_feas = std::max(r.primal_feas, -slack_ineq(i));
    r.comp_slack = std::max(r.comp_slack, std::abs(duals.ineq(i) * slack_ineq(i)));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(p.lb(j))) {
      r.primal_feas = std::max(r.primal_feas, p.lb(j) - x(j));
      r.comp_slack = std::max(r.comp_slack, std::abs(duals.lower(j) * (x(j) - p.lb(j))));
    } else {
      r.comp_slack = std::max(r.comp_slack, std::abs(duals.lower(j)) > 0.0 ? kInf : 0.0);
    }
    if (std::isfinite(p.ub(j))) {
      r.primal_feas = std::max(r.primal_feas, x(j) - p.ub(j));
      r.comp_slack = std::max(r.comp_slack, std::abs(duals.upper(j) * (p.ub(j) - x(j))));
    } else {
      r.comp_slack = std::max(r.comp_slack, std::abs(duals.upper(j)) > 0.0 ? kInf : 0.0);
    }
  }
  return r;
}

QpSolver::QpSolver(const Eigen::MatrixXd& h_matrix, const Eigen::MatrixXd& a_ineq, QpSettings settings)
    : settings_(settings), n_(h_matrix.rows()), m_(a_ineq.rows()), h_(h_matrix), a_(a_ineq) {
  if (h_matrix.cols() != n_ || (m_ > 0 && a_ineq.cols() != n_)) {
    throw Error(ErrorCode::InvalidArgument, "QP matrix dimensions inconsistent");
  }
  if (m_ == 0) a_.resize(0, n_);

  Eigen::MatrixXd h_reg = h_;
  h_reg.diagonal().array() += settings_.regularization;
  if (n_ > 0 && Eigen::LLT<Eigen::MatrixXd>(h_reg).info() != Eigen::Success) {
    throw Error(ErrorCode::NotPsd, "Cholesky of H + regularization failed");
  }

  // Ruiz equilibration of [H Cᵀ; C 0] with C = [A; I].
  h_bar_ = h_reg;
  a_bar_ = a_;
  bound_diag_ = Eigen::VectorXd::Ones(n_);
  d_ = Eigen::VectorXd::Ones(n_);
  e_ = Eigen::VectorXd::Ones(m_ + n_);
  for (int it = 0; it < settings_.ruiz_iterations; ++it) {
    Eigen::VectorXd dd(n_), de(m_ + n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      double norm = std::abs(bound_diag_(j));
      norm = std::max(norm, h_bar_.col(j).cwiseAbs().maxCoeff());
      if (m_ > 0) norm = std::max(norm, a_bar_.col(j).cwiseAbs().maxCoeff());
      dd(j) = 1.0 / std::sqrt(clamp_norm(norm));
    }
    for (Eigen::Index i = 0; i < m_; ++i) de(i) = 1.0 / std::sqrt(clamp_norm(a_bar_.row(i).cwiseAbs().maxCoeff()));
    for (Eigen::Index j = 0; j < n_; ++j) de(m_ + j) = 1.0 / std::sqrt(clamp_norm(std::abs(bound_diag_(j))));

    h_bar_ = dd.asDiagonal() * h_bar_ * dd.asDiagonal();
    if (m_ > 0) a_bar_ = de.head(m_).asDiagonal() * a_bar_ * dd.asDiagonal();
    bound_diag_ = de.tail(n_).cwiseProduct(bound_diag_).cwiseProduct(dd);
    d_ = d_.cwiseProduct(dd);
    e_ = e_.cwiseProduct(de);
  }
  double mean_col = 0.0;
  for (Eigen::Index j = 0; j < n_; ++j) mean_col += h_bar_.col(j).cwiseAbs().maxCoeff();
  mean_col = n_ > 0 ? mean_col / static_cast<double>(n_) : 1.0;
  cost_scale_ = 1.0 / std::clamp(mean_col, 1.0, 1e4);
  h_bar_ *= cost_scale_;

  Eigen::MatrixXd kkt = h_bar_;
  kkt.diagonal().array() += settings_.sigma;
  if (m_ > 0) kkt.noalias() += settings_.rho * a_bar_.transpose() * a_bar_;
  kkt.diagonal() += settings_.rho * bound_diag_.cwiseAbs2();
  kkt_.compute(kkt);
  if (kkt_.info() != Eigen::Success) throw Error(ErrorCode::NotPsd, "splitting KKT factorization failed");
}

QpDuals QpSolver::unscale_duals(const Eigen::VectorXd& y_bar, const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) const {
  const Eigen::VectorXd y = e_.cwiseProduct(y_bar) / cost_scale_;
  QpDuals d;
  d.ineq = y.head(m_).cwiseMax(0.0);
  d.upper = y.tail(n_).cwiseMax(0.0);
  d.lower = (-y.tail(n_)).cwiseMax(0.0);
  for (Eigen::Index j = 0; j < n_; ++j) {
    if (!std::isfinite(ub(j))) d.upper(j) = 0.0;
    if (!std::isfinite(lb(j))) d.lower(j) = 0.0;
  }
  return d;
}

std::vector<signed char> QpSolver::guess_active(const Eigen::VectorXd& z_bar, const Eigen::VectorXd& y_bar,
                                                const Eigen::VectorXd& l_bar, const Eigen::VectorXd& u_bar) const {
  std::vector<signed char> state(m_ + n_, 0);
  for (Eigen::Index r = 0; r < m_ + n_; ++r) {
    if (std::isfinite(u_bar(r)) && u_bar(r) - z_bar(r) < y_bar(r)) state[r] = 1;
    else if (std::isfinite(l_bar(r)) && z_bar(r) - l_bar(r) < -y_bar(r)) state[r] = -1;
  }
  return state;
}

std::optional<QpSolution> QpSolver::try_polish(const QpProblem& p, std::vector<signed char> state,
                                               const Eigen::VectorXd& l_bar, const Eigen::VectorXd& u_bar,
                                               int max_rounds) const {
  // Solve the equality-constrained problem on the guessed active set: variables at an active
  // bound are fixed, active rows enter a regularized KKT system that is refined against the
  // exact one. The guess is then corrected one step at a time: violated constraints are
  // activated, otherwise the constraint with the most wrong-signed multiplier is released.
  const Eigen::Index rows = m_ + n_;
  const Eigen::VectorXd q_bar = cost_scale_ * d_.cwiseProduct(p.f_vector);
  const double tol = settings_.tol;
  constexpr double delta = 1e-9;
  for (int round = 0; round < max_rounds; ++round) {
    std::vector<Eigen::Index> free_vars, active_rows;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const Eigen::Index r = m_ + j;
      if (state[r] == 0) free_vars.push_back(j);
      else x(j) = (state[r] > 0 ? u_bar(r) : l_bar(r)) / bound_diag_(j);
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (state[i] != 0) active_rows.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free_vars.size());
    const auto na = static_cast<Eigen::Index>(active_rows.size());

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(na);
    if (nf + na > 0) {
      const Eigen::VectorXd h_fixed = h_bar_ * x;
      Eigen::MatrixXd k0 = Eigen::MatrixXd::Zero(nf + na, nf + na);
      Eigen::VectorXd rhs(nf + na);
      for (Eigen::Index a = 0; a < nf; ++a) {
        for (Eigen::Index b = 0; b < nf; ++b) k0(a, b) = h_bar_(free_vars[a], free_vars[b]);
        rhs(a) = -q_bar(free_vars[a]) - h_fixed(free_vars[a]);
      }
      for (Eigen::Index k = 0; k < na; ++k) {
        const Eigen::Index i = active_rows[k];
        for (Eigen::Index a = 0; a < nf; ++a) k0(nf + k, a) = k0(a, nf + k) = a_bar_(i, free_vars[a]);
        rhs(nf + k) = u_bar(i) - a_bar_.row(i).dot(x);
      }
      Eigen::MatrixXd k_reg = k0;
      k_reg.diagonal().head(nf).array() += delta;
      k_reg.diagonal().tail(na).array() -= delta;
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(k_reg);
      Eigen::VectorXd sol = lu.solve(rhs);
      for (int refine = 0; refine < 5; ++refine) {
        const Eigen::VectorXd res = rhs - k0 * sol;
        if (inf_norm(res) < 1e-14 * (1.0 + inf_norm(rhs))) break;
        sol += lu.solve(res);
      }
      if (!sol.allFinite()) return std::nullopt;
      for (Eigen::Index a = 0; a < nf; ++a) x(free_vars[a]) = sol(a);
      lambda = sol.tail(na);
    }

    // Stacked multipliers: active rows from the solve, fixed bounds from stationarity.
    Eigen::VectorXd y_new = Eigen::VectorXd::Zero(rows);
    for (Eigen::Index k = 0; k < na; ++k) y_new(active_rows[k]) = lambda(k);
    Eigen::VectorXd grad = h_bar_ * x + q_bar;
    if (m_ > 0) grad.noalias() += a_bar_.transpose() * y_new.head(m_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (state[m_ + j] != 0) y_new(m_ + j) = -grad(j) / bound_diag_(j);
    }

    Eigen::VectorXd cx(rows);
    if (m_ > 0) cx.head(m_).noalias() = a_bar_ * x;
    cx.tail(n_) = bound_diag_.cwiseProduct(x);
    bool violated = false;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (state[r] != 0) continue;
      if (std::isfinite(u_bar(r)) && (cx(r) - u_bar(r)) / e_(r) > tol) state[r] = 1, violated = true;
      else if (std::isfinite(l_bar(r)) && (l_bar(r) - cx(r)) / e_(r) > tol) state[r] = -1, violated = true;
    }
    if (violated) continue;

    Eigen::Index worst = -1;
    double worst_y = tol;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (state[r] == 0) continue;
      const double wrong = -state[r] * e_(r) * y_new(r) / cost_scale_;
      if (wrong > worst_y) {
        worst_y = wrong;
        worst = r;
      }
      y_new(r) = state[r] > 0 ? std::max(y_new(r), 0.0) : std::min(y_new(r), 0.0);
    }
    if (worst >= 0) {
      state[worst] = 0;
      continue;
    }

    QpSolution out;
    out.x = d_.cwiseProduct(x);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (state[m_ + j] > 0) out.x(j) = p.ub(j);
      if (state[m_ + j] < 0) out.x(j) = p.lb(j);
    }
    const QpDuals duals = unscale_duals(y_new, p.lb, p.ub);
    const KktResiduals kkt = kkt_residuals(p, out.x, duals);
    if (!(kkt.stationarity <= tol && kkt.primal_feas <= tol && kkt.comp_slack <= tol)) return std::nullopt;

    out.duals = duals;
    out.objective = p.objective(out.x);
    out.status = QpStatus::Optimal;
    out.polished = true;
    out.y_stacked.resize(rows);
    out.y_stacked.head(m_) = duals.ineq;
    out.y_stacked.tail(n_) = duals.upper - duals.lower;
    return out;
  }
  return std::nullopt;
}

QpSolution QpSolver::solve(const Eigen::VectorXd& f, const Eigen::VectorXd& b, const Eigen::VectorXd& lb,
                           const Eigen::VectorXd& ub, const QpWarmStart* warm) const {
  QpProblem p{h_, f, a_, b, lb, ub};
  p.validate();

  std::vector<Eigen::Index> free_vars;
  for (Eigen::Index j = 0; j < n_; ++j) {
    if (!(std::isfinite(lb(j)) && lb(j) == ub(j))) free_vars.push_back(j);
  }
  if (static_cast<Eigen::Index>(free_vars.size()) < n_) return solve_reduced(p, free_vars, warm);

  const double rho = settings_.rho;
  const double sigma = settings_.sigma;
  const double alpha = settings_.alpha;
  const Eigen::Index rows = m_ + n_;

  Eigen::VectorXd l_bar(rows), u_bar(rows);
  for (Eigen::Index i = 0; i < m_; ++i) {
    l_bar(i) = -kInf;
    u_bar(i) = e_(i) * b(i);
  }
  for (Eigen::Index j = 0; j < n_; ++j) {
    l_bar(m_ + j) = std::isfinite(lb(j)) ? e_(m_ + j) * lb(j) : -kInf;
    u_bar(m_ + j) = std::isfinite(ub(j)) ? e_(m_ + j) * ub(j) : kInf;
  }
  const Eigen::VectorXd q_bar = cost_scale_ * d_.cwiseProduct(f);

  auto apply_c = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd out(rows);
    if (m_ > 0) out.head(m_).noalias() = a_bar_ * x;
    out.tail(n_) = bound_diag_.cwiseProduct(x);
    return out;
  };
  auto apply_ct = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd out = bound_diag_.cwiseProduct(w.tail(n_));
    if (m_ > 0) out.noalias() += a_bar_.transpose() * w.head(m_);
    return out;
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
  if (warm && warm->x.size() == n_) x = warm->x.cwiseQuotient(d_);
  if (warm && warm->y_stacked.size() == rows) y = cost_scale_ * warm->y_stacked.cwiseQuotient(e_);
  Eigen::VectorXd z = apply_c(x).cwiseMax(l_bar).cwiseMin(u_bar);

  QpSolution sol;
  const double polish_eps = settings_.polish_trigger;
  std::vector<signed char> last_polish;
  int last_polish_iter = -kPolishSpacing;
  Eigen::VectorXd x_tilde(n_), z_tilde(rows), z_prev(rows), y_prev(rows), rhs(n_);

  for (int iter = 1; iter <= settings_.max_iter; ++iter) {
    y_prev = y;
    z_prev = z;
    rhs = sigma * x - q_bar + apply_ct(rho * z - y);
    x_tilde = kkt_.solve(rhs);
    z_tilde = apply_c(x_tilde);
    x = alpha * x_tilde + (1.0 - alpha) * x;
    const Eigen::VectorXd z_relaxed = alpha * z_tilde + (1.0 - alpha) * z_prev;
    z = (z_relaxed + y / rho).cwiseMax(l_bar).cwiseMin(u_bar);
    y += rho * (z_relaxed - z);

    if (iter % settings_.check_every != 0 && iter != settings_.max_iter) continue;
    sol.iterations = iter;

    // Unscaled KKT residuals of the current iterate.
    const Eigen::VectorXd x_orig = d_.cwiseProduct(x);
    const QpDuals duals = unscale_duals(y, lb, ub);
    const KktResiduals kkt = kkt_residuals(p, x_orig, duals);
    if (kkt.stationarity <= settings_.tol && kkt.primal_feas <= settings_.tol && kkt.comp_slack <= settings_.tol) {
      if (settings_.polish) {
        const int rounds = settings_.early_polish_rounds;
        if (auto polished = try_polish(p, guess_active(z, y, l_bar, u_bar), l_bar, u_bar, rounds)) {
          polished->iterations = iter;
          return *polished;
        }
      }
      sol.x = x_orig;
      sol.duals = duals;
      sol.objective = p.objective(sol.x);
      sol.status = QpStatus::Optimal;
      sol.y_stacked = e_.cwiseProduct(y) / cost_scale_;
      return sol;
    }

    // Relative splitting residuals (scaled space) decide when an active-set polish is worth trying.
    const Eigen::VectorXd cx = apply_c(x);
    const Eigen::VectorXd hx = h_bar_ * x;
    const Eigen::VectorXd cty = apply_ct(y);
    const double r_prim = inf_norm(e_.cwiseInverse().cwiseProduct(cx - z));
    const double r_dual = inf_norm(d_.cwiseInverse().cwiseProduct(hx + q_bar + cty)) / cost_scale_;
    const double s_prim = std::max(inf_norm(e_.cwiseInverse().cwiseProduct(cx)),
                                   inf_norm(e_.cwiseInverse().cwiseProduct(z)));
    const double s_dual = std::max({inf_norm(d_.cwiseInverse().cwiseProduct(hx)),
                                    inf_norm(d_.cwiseInverse().cwiseProduct(cty)),
                                    inf_norm(d_.cwiseInverse().cwiseProduct(q_bar))}) /
                          cost_scale_;
    if (settings_.polish && r_prim <= polish_eps * (1.0 + s_prim) && r_dual <= polish_eps * (1.0 + s_dual)) {
      std::vector<signed char> state = guess_active(z, y, l_bar, u_bar);
      const bool tight = r_prim <= kTightPolish * (1.0 + s_prim) && r_dual <= kTightPolish * (1.0 + s_dual);
      const int rounds = tight ? settings_.polish_rounds : settings_.early_polish_rounds;
      if (state != last_polish && iter - last_polish_iter >= kPolishSpacing) {
        last_polish_iter = iter;
        if (auto polished = try_polish(p, state, l_bar, u_bar, rounds)) {
          polished->iterations = iter;
          return *polished;
        }
        last_polish = std::move(state);
      }
    }

    // Primal infeasibility certificate from the dual increment.
    const Eigen::VectorXd dy = e_.cwiseProduct(y - y_prev);
    const double dy_norm = inf_norm(dy);
    if (dy_norm > 1e-12) {
      const double eps = settings_.eps_infeasible;
      // Cᵀ δy in original units.
      Eigen::VectorXd ct_dy = dy.tail(n_);
      if (m_ > 0) ct_dy += a_.transpose() * dy.head(m_);
      if (inf_norm(ct_dy) <= eps * dy_norm) {
        double support = 0.0;
        bool valid = true;
        for (Eigen::Index i = 0; i < rows && valid; ++i) {
          const double up = i < m_ ? b(i) : ub(i - m_);
          const double lo = i < m_ ? -kInf : lb(i - m_);
          const double v = dy(i);
          if (v > eps * dy_norm) {
            if (!std::isfinite(up)) valid = false;
            else support += up * v;
          } else if (v < -eps * dy_norm) {
            if (!std::isfinite(lo)) valid = false;
            else support += lo * v;
          }
        }
        if (valid && support < -eps * dy_norm) {
          sol.x = x_orig;
          sol.duals = duals;
          sol.objective = p.objective(sol.x);
          sol.status = QpStatus::Infeasible;
          sol.y_stacked = e_.cwiseProduct(y) / cost_scale_;
          return sol;
        }
      }
    }
  }

  sol.x = d_.cwiseProduct(x);
  sol.duals = unscale_duals(y, lb, ub);
  sol.objective = p.objective(sol.x);
  sol.status = QpStatus::MaxIter;
  sol.iterations = settings_.max_iter;
  sol.y_stacked = e_.cwiseProduct(y) / cost_scale_;
  return sol;
}

QpSolution QpSolver::solve_reduced(const QpProblem& p, const std::vector<Eigen::Index>& free_vars,
                                   const QpWarmStart* warm) const {
  const auto nf = static_cast<Eigen::Index>(free_vars.size());
  std::vector<char> fixed(n_, 1);
  for (Eigen::Index j : free_vars) fixed[j] = 0;
  Eigen::VectorXd x_base = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    if (fixed[j]) x_base(j) = p.lb(j);
  }

  QpSolution sol;
  sol.x = x_base;
  Eigen::VectorXd ineq_duals = Eigen::VectorXd::Zero(m_);
  if (nf > 0) {
    Eigen::MatrixXd h_ff(nf, nf), a_f(m_, nf);
    Eigen::VectorXd f_f(nf), lb_f(nf), ub_f(nf);
    const Eigen::VectorXd h_base = p.h_matrix * x_base;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const Eigen::Index j = free_vars[a];
      for (Eigen::Index b = 0; b < nf; ++b) h_ff(a, b) = p.h_matrix(j, free_vars[b]);
      if (m_ > 0) a_f.col(a) = p.a_ineq.col(j);
      f_f(a) = p.f_vector(j) + h_base(j);
      lb_f(a) = p.lb(j);
      ub_f(a) = p.ub(j);
    }
    const Eigen::VectorXd b_f = m_ > 0 ? Eigen::VectorXd(p.b_ineq - p.a_ineq * x_base) : Eigen::VectorXd(0);

    QpWarmStart ws;
    if (warm && warm->x.size() == n_) {
      ws.x.resize(nf);
      for (Eigen::Index a = 0; a < nf; ++a) ws.x(a) = warm->x(free_vars[a]);
      if (warm->y_stacked.size() == m_ + n_) {
        ws.y_stacked.resize(m_ + nf);
        ws.y_stacked.head(m_) = warm->y_stacked.head(m_);
        for (Eigen::Index a = 0; a < nf; ++a) ws.y_stacked(m_ + a) = warm->y_stacked(m_ + free_vars[a]);
      }
    }
    const QpSolver reduced(h_ff, a_f, settings_);
    const QpSolution r = reduced.solve(f_f, b_f, lb_f, ub_f, ws.x.size() ? &ws : nullptr);
    for (Eigen::Index a = 0; a < nf; ++a) sol.x(free_vars[a]) = r.x(a);
    ineq_duals = r.duals.ineq;
    sol.status = r.status;
    sol.iterations = r.iterations;
    sol.polished = r.polished;
    sol.duals.lower = Eigen::VectorXd::Zero(n_);
    sol.duals.upper = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index a = 0; a < nf; ++a) {
      sol.duals.lower(free_vars[a]) = r.duals.lower(a);
      sol.duals.upper(free_vars[a]) = r.duals.upper(a);
    }
  } else {
    sol.duals.lower = Eigen::VectorXd::Zero(n_);
    sol.duals.upper = Eigen::VectorXd::Zero(n_);
    const double viol = m_ > 0 ? (p.a_ineq * x_base - p.b_ineq).maxCoeff() : 0.0;
    sol.status = viol <= settings_.tol ? QpStatus::Optimal : QpStatus::Infeasible;
  }
  sol.duals.ineq = ineq_duals;

  // Bound multipliers of the fixed variables absorb their stationarity residual.
  Eigen::VectorXd grad = p.h_matrix * sol.x + p.f_vector;
  if (m_ > 0) grad += p.a_ineq.transpose() * ineq_duals;
  for (Eigen::Index j = 0; j < n_; ++j) {
    if (!fixed[j]) continue;
    sol.duals.upper(j) = std::max(-grad(j), 0.0);
    sol.duals.lower(j) = std::max(grad(j), 0.0);
  }
  sol.objective = p.objective(sol.x);
  sol.y_stacked.resize(m_ + n_);
  sol.y_stacked.head(m_) = sol.duals.ineq;
  sol.y_stacked.tail(n_) = sol.duals.upper - sol.duals.lower;
  return sol;
}

QpSolution solve_qp(const QpProblem& p, double tol, int max_iter) {
  p.validate();
  QpSettings settings;
  settings.tol = tol;
  settings.max_iter = max_iter;
  const QpSolver solver(p.h_matrix, p.a_ineq, settings);
  return solver.solve(p.f_vector, p.b_ineq, p.lb, p.ub);
}

namespace {

void write_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& name) {
  std::string tag;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> tag >> rows >> cols) || tag != name || rows < 0 || cols < 0) {
    throw Error(ErrorCode::ParseError, "QP dump: expected block '" + name + "'");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::string tok;
      if (!(in >> tok)) throw Error(ErrorCode::ParseError, "QP dump: truncated block '" + name + "'");
      m(r, c) = std::stod(tok);  // accepts inf / -inf
    }
  }
  return m;
}

}  // namespace

void dump_qp(const std::filesystem::path& path, const QpProblem& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_matrix(out, "H", p.h_matrix);
  write_matrix(out, "f", p.f_vector.transpose());
  write_matrix(out, "A", p.a_ineq);
  write_matrix(out, "b", p.b_ineq.transpose());
  write_matrix(out, "lb", p.lb.transpose());
  write_matrix(out, "ub", p.ub.transpose());
}

QpProblem load_qp_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  QpProblem p;
  p.h_matrix = read_matrix(in, "H");
  p.f_vector = read_matrix(in, "f").transpose();
  p.a_ineq = read_matrix(in, "A");
  p.b_ineq = read_matrix(in, "b").transpose();
  p.lb = read_matrix(in, "lb").transpose();
  p.ub = read_matrix(in, "ub").transpose();
  if (p.a_ineq.rows() == 0) p.a_ineq.resize(0, p.f_vector.size());
  p.validate();
  return p;
}

}  // namespace hptune
