#include "hptune/mpc_controllers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hptune/error.hpp"

namespace hptune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kIntegralityTol = 1e-6;
// Correction rounds per coarse polish attempt in the receding-horizon QP.
constexpr int kEarlyPolishRounds = 3;

void check_forecast(const Forecast& fc, int horizon) {
  const auto need = static_cast<std::size_t>(horizon) + 1;
  if (fc.prices.size() < need || fc.t_out.size() < need || fc.solar.size() < need || fc.occupied.size() < need) {
    throw Error(ErrorCode::ForecastTooShort, "forecast must cover horizon + 1 steps");
  }
  for (int i = 0; i < horizon; ++i) {
    if (!(fc.prices[i] >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative price in forecast");
  }
}

void check_history(const ArxModel& model, const MpcHistory& hist) {
  if (static_cast<int>(hist.y.size()) < model.na) throw Error(ErrorCode::HistoryTooShort, "y history shorter than na");
  if (hist.u_past.rows() < model.past_rows() - 1 || hist.u_past.cols() != kArxInputs) {
    throw Error(ErrorCode::HistoryTooShort, "input history shorter than nb + t_d - 1 rows");
  }
}

/// Temperature band rows shared by the QP and MIQP layouts. Slack blocks start at
/// `eps_lo_col` / `eps_hi_col`.
void fill_band_rows(const PredictionMatrices& pm, const MpcConfig& cfg, const Forecast& fc, Eigen::MatrixXd& a,
                    Eigen::VectorXd& b, int eps_lo_col, int eps_hi_col) {
  const int n = cfg.horizon;
  for (int k = 0; k < n; ++k) {
    const bool occ = fc.occupied[k + 1] != 0;
    const double lo = occ ? cfg.t_lb_occ : cfg.t_lb_unocc;
    const double hi = occ ? cfg.t_ub_occ : cfg.t_ub_unocc;
    a.row(k).head(n) = -pm.input_gain.row(k);
    a(k, eps_lo_col + k) = -1.0;
    b(k) = pm.free_response(k) - lo;
    a.row(n + k).head(n) = pm.input_gain.row(k);
    a(n + k, eps_hi_col + k) = -1.0;
    b(n + k) = hi - pm.free_response(k);
  }
}

}  // namespace

void MpcConfig::validate_shape() const {
  if (horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
  if (!(r_coeff >= 0.0 && s_coeff >= 0.0)) throw Error(ErrorCode::InvalidArgument, "R and S must be non-negative");
  if (!(u_low >= 0.0 && u_low <= u_max && u_max <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 <= u_low <= u_max <= 1");
  }
  if (!(t_lb_occ <= t_ub_occ && t_lb_unocc <= t_ub_unocc)) {
    throw Error(ErrorCode::InvalidArgument, "temperature band lower bound above upper bound");
  }
}

void MpcConfig::validate() const {
  validate_shape();
  if (!(r_coeff > 0.0 && s_coeff > 0.0)) throw Error(ErrorCode::InvalidArgument, "R and S must be positive");
}

PredictionMatrices prediction_matrices(const ArxModel& model, int horizon, const Forecast& fc,
                                       const MpcHistory& hist) {
  check_history(model, hist);
  check_forecast(fc, horizon);
  const int past = model.past_rows();
  const int rows = past + horizon;

  Eigen::MatrixXd window = Eigen::MatrixXd::Zero(rows, kArxInputs);
  window.topRows(past - 1) = hist.u_past.bottomRows(past - 1);
  for (int i = 0; i <= horizon && past - 1 + i < rows; ++i) {
    window(past - 1 + i, 1) = fc.t_out[i];
    window(past - 1 + i, 2) = fc.solar[i];
  }

  PredictionMatrices pm;
  const auto free = predict(model, hist.y, window, horizon);
  pm.free_response = Eigen::Map<const Eigen::VectorXd>(free.data(), horizon);

  pm.input_gain = Eigen::MatrixXd::Zero(horizon, horizon);
  const std::vector<double> zero_hist(model.na, 0.0);
  Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(rows, kArxInputs);
  for (int j = 0; j < horizon; ++j) {
    unit(past - 1 + j, 0) = 1.0;
    const auto col = predict(model, zero_hist, unit, horizon);
    for (int k = 0; k < horizon; ++k) pm.input_gain(k, j) = col[k];
    unit(past - 1 + j, 0) = 0.0;
  }
  return pm;
}

QpProblem build_qp_mpc(const ArxModel& model, const MpcConfig& cfg, const Forecast& fc, const MpcHistory& hist) {
  cfg.validate_shape();
  const int n = cfg.horizon;
  const PredictionMatrices pm = prediction_matrices(model, n, fc, hist);

  QpProblem p;
  const int nv = 3 * n;
  p.h_matrix = Eigen::MatrixXd::Zero(nv, nv);
  p.h_matrix.diagonal().segment(n, 2 * n).setConstant(2.0 * cfg.s_coeff);
  p.f_vector = Eigen::VectorXd::Zero(nv);
  for (int t = 0; t < n; ++t) p.f_vector(t) = cfg.r_coeff * fc.prices[t];

  p.a_ineq = Eigen::MatrixXd::Zero(2 * n, nv);
  p.b_ineq = Eigen::VectorXd::Zero(2 * n);
  fill_band_rows(pm, cfg, fc, p.a_ineq, p.b_ineq, n, 2 * n);

  p.lb = Eigen::VectorXd::Zero(nv);
  p.ub = Eigen::VectorXd::Constant(nv, kInf);
  p.ub.head(n).setConstant(cfg.u_max);
  return p;
}

QpProblem build_miqp_relaxation(const ArxModel& model, const MpcConfig& cfg, const Forecast& fc,
                                const MpcHistory& hist, const HeatPumpModel& hp) {
  cfg.validate_shape();
  hp.validate();
  const int n = cfg.horizon;
  const PredictionMatrices pm = prediction_matrices(model, n, fc, hist);

  QpProblem p;
  const int nv = 4 * n;
  p.h_matrix = Eigen::MatrixXd::Zero(nv, nv);
  p.h_matrix.diagonal().segment(n, 2 * n).setConstant(2.0 * cfg.s_coeff);
  p.f_vector = Eigen::VectorXd::Zero(nv);
  for (int t = 0; t < n; ++t) {
    p.f_vector(t) = cfg.r_coeff * fc.prices[t] * hp.phi;
    p.f_vector(3 * n + t) = cfg.r_coeff * fc.prices[t] * hp.gamma;
  }

  p.a_ineq = Eigen::MatrixXd::Zero(3 * n, nv);
  p.b_ineq = Eigen::VectorXd::Zero(3 * n);
  fill_band_rows(pm, cfg, fc, p.a_ineq, p.b_ineq, n, 2 * n);
  for (int t = 0; t < n; ++t) {  // u_t - u_max * alpha_t <= 0
    p.a_ineq(2 * n + t, t) = 1.0;
    p.a_ineq(2 * n + t, 3 * n + t) = -cfg.u_max;
  }

  p.lb = Eigen::VectorXd::Zero(nv);
  p.ub = Eigen::VectorXd::Constant(nv, kInf);
  p.ub.head(n).setConstant(cfg.u_max);
  p.ub.tail(n).setConstant(1.0);
  return p;
}

double apply_mask(double u_mpc, double u_low) { return u_mpc < u_low ? 0.0 : u_mpc; }

double rule_based_control(double t_in, bool occupied) {
  constexpr double kGain = 2.0;  // per K
  const double setpoint = occupied ? 21.2 : 20.5;
  return std::clamp(kGain * (setpoint + 0.1 - t_in), 0.0, 1.0);
}

MiqpSolution branch_and_bound(const QpSolver& solver, const QpProblem& relaxation, int horizon, int node_limit,
                              const QpWarmStart* warm) {
  if (node_limit < 1) throw Error(ErrorCode::InvalidArgument, "node_limit must be >= 1");
  const int n = horizon;
  const Eigen::Index alpha0 = relaxation.num_vars() - n;

  struct Node {
    Eigen::VectorXd lb;
    Eigen::VectorXd ub;
    double parent_bound;
    QpWarmStart warm;
  };

  MiqpSolution best;
  best.objective = kInf;
  int solved = 0;
  int iterations = 0;

  auto solve_node = [&](const Eigen::VectorXd& lb, const Eigen::VectorXd& ub, const QpWarmStart* ws) {
    ++solved;
    QpSolution s = solver.solve(relaxation.f_vector, relaxation.b_ineq, lb, ub, ws);
    iterations += s.iterations;
    return s;
  };

  // Fix alpha to a 0/1 pattern and solve; updates the incumbent.
  auto try_pattern = [&](const Eigen::VectorXd& lb, const Eigen::VectorXd& ub, const Eigen::VectorXd& alpha,
                         const QpWarmStart* ws) {
    Eigen::VectorXd flb = lb, fub = ub;
    for (int t = 0; t < n; ++t) flb(alpha0 + t) = fub(alpha0 + t) = alpha(t) > 0.5 ? 1.0 : 0.0;
    QpSolution s = solve_node(flb, fub, ws);
    if (s.status != QpStatus::Optimal) return;
    if (s.objective < best.objective) {
      best.objective = s.objective;
      best.u.assign(s.x.data(), s.x.data() + n);
      best.alpha.resize(n);
      for (int t = 0; t < n; ++t) best.alpha[t] = flb(alpha0 + t) > 0.5 ? 1 : 0;
      best.incumbent_qp = std::move(s);
    }
  };

  std::vector<Node> stack;
  stack.push_back({relaxation.lb, relaxation.ub, -kInf, warm ? *warm : QpWarmStart{}});
  bool root = true;
  double open_bound = kInf;

  while (!stack.empty()) {
    if (solved >= node_limit) {
      for (const auto& nd : stack) open_bound = std::min(open_bound, nd.parent_bound);
      break;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    auto pruned = [&](double bound) { return bound >= best.objective - 1e-9 * (1.0 + std::abs(best.objective)); };
    if (pruned(node.parent_bound)) continue;

    const QpSolution rel = solve_node(node.lb, node.ub, node.warm.x.size() ? &node.warm : nullptr);
    if (rel.status == QpStatus::Infeasible) {
      if (root) throw Error(ErrorCode::RelaxationInfeasible, "root relaxation infeasible");
      continue;
    }
    if (root) {
      // Rounding heuristic: switch on wherever the relaxation heats.
      Eigen::VectorXd alpha(n);
      for (int t = 0; t < n; ++t) alpha(t) = rel.x(t) > kIntegralityTol ? 1.0 : 0.0;
      const QpWarmStart ws{rel.x, rel.y_stacked};
      try_pattern(node.lb, node.ub, alpha, &ws);
      root = false;
    }
    // An unconverged relaxation gives no valid bound; keep the parent's.
    const double bound = rel.status == QpStatus::Optimal ? rel.objective : node.parent_bound;
    if (pruned(bound)) continue;

    int branch = -1;
    double most_fractional = kIntegralityTol;
    for (int t = 0; t < n; ++t) {
      const double a = rel.x(alpha0 + t);
      const double frac = std::min(a - std::floor(a), std::ceil(a) - a);
      if (frac > most_fractional) {
        most_fractional = frac;
        branch = t;
      }
    }
    const QpWarmStart child_warm{rel.x, rel.y_stacked};
    if (branch < 0) {
      Eigen::VectorXd alpha = rel.x.tail(n);
      try_pattern(node.lb, node.ub, alpha, &child_warm);
      continue;
    }
    Node zero{node.lb, node.ub, bound, child_warm};
    Node one{node.lb, node.ub, bound, child_warm};
    zero.ub(alpha0 + branch) = 0.0;
    one.lb(alpha0 + branch) = 1.0;
    // Depth-first: explore the side the relaxation leans to first (pushed last).
    if (rel.x(alpha0 + branch) >= 0.5) {
      stack.push_back(std::move(zero));
      stack.push_back(std::move(one));
    } else {
      stack.push_back(std::move(one));
      stack.push_back(std::move(zero));
    }
  }

  if (!std::isfinite(best.objective)) {
    throw Error(ErrorCode::NodeLimitHit, "no integer-feasible incumbent within the node limit");
  }
  best.nodes_explored = solved;
  best.qp_iterations = iterations;
  best.completed = stack.empty();
  best.gap = best.completed ? 0.0 : std::max(0.0, best.objective - open_bound);
  return best;
}

MiqpSolution solve_miqp(const ArxModel& model, const MpcConfig& cfg, const Forecast& fc, const MpcHistory& hist,
                        const HeatPumpModel& hp, int node_limit) {
  const QpProblem relaxation = build_miqp_relaxation(model, cfg, fc, hist, hp);
  const QpSolver solver(relaxation.h_matrix, relaxation.a_ineq);
  return branch_and_bound(solver, relaxation, cfg.horizon, node_limit);
}

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::QP: return "QP";
    case ControllerKind::Mask: return "Mask";
    case ControllerKind::MIQP: return "MIQP";
  }
  return "Unknown";
}

std::string mpc_log_jsonl(const std::vector<MpcStepLog>& log) {
  std::ostringstream out;
  for (const auto& r : log) {
    nlohmann::json j;
    j["t"] = r.t;
    j["status"] = r.status;
    j["u_first"] = r.u_first;
    j["obj"] = r.objective;
    j["solve_ms"] = r.solve_ms;
    j["masked"] = r.masked;
    out << j.dump() << '\n';
  }
  return out.str();
}

namespace {

/// Shifts each horizon-sized block of `v` left by one step, repeating the last entry.
Eigen::VectorXd shift_blocks(const Eigen::VectorXd& v, int block) {
  Eigen::VectorXd out = v;
  for (Eigen::Index start = 0; start + block <= v.size(); start += block) {
    out.segment(start, block - 1) = v.segment(start + 1, block - 1);
  }
  return out;
}

class MpcPolicy {
 public:
  MpcPolicy(ControllerKind kind, const ArxModel& model, const MpcConfig& cfg, const HeatPumpModel& hp,
            std::function<double(Timestamp)> price_at, const OccupancySchedule& schedule,
            std::shared_ptr<std::vector<MpcStepLog>> log, MpcPolicyOptions options)
      : kind_(kind), model_(model), cfg_(cfg), hp_(hp), price_at_(std::move(price_at)), schedule_(schedule),
        log_(std::move(log)), options_(options) {
    model_.validate();
    cfg_.validate();
    hp_.validate();
    options_.qp_settings.tol = std::max(options_.qp_settings.tol, 1e-6);
  }

  double operator()(const StepContext& ctx) {
    const WeatherSeries& w = *ctx.weather;
    const int n = cfg_.horizon;
    const int k = ctx.step;
    const int past = model_.past_rows();

    if (k == 0 || y_hist_.empty()) {
      y_hist_.assign(model_.na, ctx.state.t_in);
      u_hist_ = Eigen::MatrixXd::Zero(std::max(past - 1, 1), kArxInputs);
      for (Eigen::Index r = 0; r < u_hist_.rows(); ++r) {
        u_hist_(r, 1) = w.t_out[0];
        u_hist_(r, 2) = w.solar[0];
      }
    } else {
      y_hist_.erase(y_hist_.begin());
      y_hist_.push_back(ctx.state.t_in);
    }

    Forecast fc;
    fc.prices.resize(n + 1);
    fc.t_out.resize(n + 1);
    fc.solar.resize(n + 1);
    fc.occupied.resize(n + 1);
    const int total = w.grid.n_steps;
    const int per_day = w.grid.steps_per_day();
    for (int i = 0; i <= n; ++i) {
      int idx = k + i;
      while (idx >= total) idx -= std::min(per_day, total);
      const Timestamp ts = w.grid.at(k + i);
      fc.prices[i] = price_at_(ts);
      fc.t_out[i] = w.t_out[idx];
      fc.solar[i] = w.solar[idx];
      fc.occupied[i] = (k + i < total) ? ctx.occupied[k + i] : (occupancy_at(schedule_, ts) ? 1 : 0);
    }

    MpcHistory hist{y_hist_, u_hist_};
    const auto t0 = std::chrono::steady_clock::now();
    double u_first = 0.0;
    double obj = 0.0;
    int iterations = 0;
    std::string status;

    if (kind_ == ControllerKind::MIQP) {
      const QpProblem rel = build_miqp_relaxation(model_, cfg_, fc, hist, hp_);
      if (!solver_) solver_ = std::make_unique<QpSolver>(rel.h_matrix, rel.a_ineq, options_.qp_settings);
      QpWarmStart ws;
      const bool use_warm = options_.warm_start && last_x_.size() == rel.num_vars();
      if (use_warm) ws = {shift_blocks(last_x_, n), Eigen::VectorXd()};
      const MiqpSolution sol = branch_and_bound(*solver_, rel, n, options_.miqp_node_limit, use_warm ? &ws : nullptr);
      u_first = sol.u[0];
      obj = sol.objective;
      status = sol.completed ? "Optimal" : "NodeLimitHit";
      iterations = sol.qp_iterations;
      last_x_ = sol.incumbent_qp.x;
    } else {
      const QpProblem p = build_qp_mpc(model_, cfg_, fc, hist);
      if (!solver_) {
        QpSettings settings = options_.qp_settings;
        settings.early_polish_rounds = std::min(settings.early_polish_rounds, kEarlyPolishRounds);
        solver_ = std::make_unique<QpSolver>(p.h_matrix, p.a_ineq, settings);
      }
      QpWarmStart ws;
      const bool use_warm = options_.warm_start && last_x_.size() == p.num_vars();
      if (use_warm) ws.x = shift_blocks(last_x_, n);
      const QpSolution sol = solver_->solve(p.f_vector, p.b_ineq, p.lb, p.ub, use_warm ? &ws : nullptr);
      status = to_string(sol.status);
      iterations = sol.iterations;
      if (sol.status == QpStatus::Optimal) {
        u_first = std::clamp(sol.x(0), 0.0, cfg_.u_max);
        obj = sol.objective;
        last_x_ = sol.x;
      } else {
        u_first = rule_based_control(ctx.state.t_in, ctx.occupied[k] != 0);
        status += "/fallback";
        last_x_.resize(0);
      }
    }
    const double solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    if (u_first < 1e-9) u_first = 0.0;
    double u_applied = u_first;
    bool masked = false;
    if (kind_ == ControllerKind::Mask) {
      u_applied = apply_mask(u_first, cfg_.u_low);
      masked = u_applied != u_first;
    }
    u_applied = std::clamp(u_applied, 0.0, 1.0);

    // Roll the input history forward with the row for time t0.
    if (past - 1 >= 1) {
      Eigen::MatrixXd next(u_hist_.rows(), kArxInputs);
      next.topRows(u_hist_.rows() - 1) = u_hist_.bottomRows(u_hist_.rows() - 1);
      next(u_hist_.rows() - 1, 0) = u_applied;
      next(u_hist_.rows() - 1, 1) = w.t_out[k];
      next(u_hist_.rows() - 1, 2) = w.solar[k];
      u_hist_ = next;
    }

    if (log_) log_->push_back({k, status, u_first, obj, solve_ms, masked, iterations});
    return u_applied;
  }

 private:
  ControllerKind kind_;
  ArxModel model_;
  MpcConfig cfg_;
  HeatPumpModel hp_;
  std::function<double(Timestamp)> price_at_;
  OccupancySchedule schedule_;
  std::shared_ptr<std::vector<MpcStepLog>> log_;
  MpcPolicyOptions options_;

  std::vector<double> y_hist_;
  Eigen::MatrixXd u_hist_;
  std::unique_ptr<QpSolver> solver_;
  Eigen::VectorXd last_x_;
};

}  // namespace

ControlPolicy mpc_policy(ControllerKind kind, const ArxModel& model, const MpcConfig& cfg, const HeatPumpModel& hp,
                         std::function<double(Timestamp)> price_at, const OccupancySchedule& schedule,
                         std::shared_ptr<std::vector<MpcStepLog>> log, MpcPolicyOptions options) {
  auto policy = std::make_shared<MpcPolicy>(kind, model, cfg, hp, std::move(price_at), schedule, std::move(log),
                                            options);
  return [policy](const StepContext& ctx) { return (*policy)(ctx); };
}

ControlPolicy rule_based_policy() {
  return [](const StepContext& ctx) { return rule_based_control(ctx.state.t_in, ctx.occupied[ctx.step] != 0); };
}

}  // namespace hptune
