#include "hptune/config_optimizer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "hptune/error.hpp"

namespace hptune {

namespace {

constexpr std::array<int, 12> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
constexpr double kStdFloor = 1e-12;

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(k)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd unit_matrix(const ConfigParams& params, const std::vector<EvalRecord>& hist) {
  Eigen::MatrixXd x(hist.size(), params.dim());
  for (std::size_t i = 0; i < hist.size(); ++i) x.row(i) = to_unit(params, hist[i].theta).transpose();
  return x;
}

bool better(const EvalRecord& a, const std::optional<EvalRecord>& best) {
  return a.feasible() && (!best || a.j_value < best->j_value);
}

}  // namespace

void ConfigParams::validate() const {
  if (domain.empty() || domain.size() > kPrimes.size()) throw Error(ErrorCode::InvalidArgument, "domain dimension outside 1..12");
  for (const auto& [lo, hi] : domain) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw Error(ErrorCode::InvalidArgument, "degenerate domain box");
  }
  if (max_iters < 1 || n_init < 1) throw Error(ErrorCode::InvalidArgument, "K and n_init must be >= 1");
  if (!(beta_sqrt_const >= 0.0)) throw Error(ErrorCode::InvalidArgument, "beta_sqrt must be >= 0");
  if (!(lengthscale > 0.0) || !(noise_var > 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel settings must be positive");
  if (n_candidates < 1 || n_local < 0 || !(local_std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "bad candidate settings");
}

double ConfigParams::beta_sqrt(int n_obs) const {
  if (beta_schedule == BetaSchedule::Constant) return beta_sqrt_const;
  return std::sqrt(0.2 * dim() * std::log(2.0 * std::max(n_obs, 1)));
}

Eigen::VectorXd Surrogate::lcb(const Eigen::MatrixXd& unit_points, double beta_sqrt) const {
  return (offset + scale * lcb_batch(gp, unit_points, beta_sqrt).array()).matrix();
}

Surrogate fit_surrogate(const Eigen::MatrixXd& unit_x, const Eigen::VectorXd& y, const ConfigParams& params) {
  Surrogate s;
  if (y.size() > 0) {
    s.offset = y.mean();
    const double sd = y.size() > 1 ? std::sqrt((y.array() - s.offset).square().sum() / (y.size() - 1)) : 0.0;
    s.scale = sd > kStdFloor ? sd : 1.0;
  }
  const Eigen::VectorXd z = (y.array() - s.offset) / s.scale;
  const Kernel k = Kernel::isotropic(params.kernel, params.dim(), params.lengthscale);
  if (params.lengthscale_search) {
    s.gp = fit_with_lengthscale_search(unit_x, z, k, params.noise_var, {0.05, 0.1, 0.2, 0.4, 0.8});
  } else {
    s.gp = fit(unit_x, z, k, params.noise_var);
  }
  return s;
}

Eigen::VectorXd to_unit(const ConfigParams& params, const std::vector<double>& theta) {
  if (static_cast<int>(theta.size()) != params.dim()) throw Error(ErrorCode::InvalidArgument, "theta dimension mismatch");
  Eigen::VectorXd u(theta.size());
  for (int i = 0; i < params.dim(); ++i) {
    const auto [lo, hi] = params.domain[i];
    u(i) = (theta[i] - lo) / (hi - lo);
  }
  return u;
}

std::vector<double> from_unit(const ConfigParams& params, const Eigen::Ref<const Eigen::VectorXd>& u) {
  std::vector<double> theta(u.size());
  for (int i = 0; i < params.dim(); ++i) {
    const auto [lo, hi] = params.domain[i];
    theta[i] = std::clamp(lo + u(i) * (hi - lo), lo, hi);
  }
  return theta;
}

Eigen::MatrixXd latin_hypercube(int n, int dim, std::uint64_t seed) {
  auto rng = stream(seed, 0x4c48, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd x(n, dim);
  std::vector<int> perm(n);
  for (int d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < n; ++i) x(i, d) = (perm[i] + unif(rng)) / n;
  }
  return x;
}

Eigen::MatrixXd candidate_set(const ConfigParams& params, int iteration, const Eigen::VectorXd* incumbent) {
  const int d = params.dim();
  const int n_local = incumbent ? params.n_local : 0;
  Eigen::MatrixXd c(params.n_candidates + n_local, d);
  auto rng = stream(params.seed, 0x4341, static_cast<std::uint64_t>(iteration));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd shift(d);
  for (int j = 0; j < d; ++j) shift(j) = unif(rng);
  for (int i = 0; i < params.n_candidates; ++i) {
    for (int j = 0; j < d; ++j) {
      const double v = radical_inverse(static_cast<std::uint64_t>(i) + 1, kPrimes[j]) + shift(j);
      c(i, j) = v - std::floor(v);
    }
  }
  std::normal_distribution<double> noise(0.0, params.local_std);
  for (int i = 0; i < n_local; ++i) {
    for (int j = 0; j < d; ++j) c(params.n_candidates + i, j) = std::clamp((*incumbent)(j) + noise(rng), 0.0, 1.0);
  }
  return c;
}

bool check_feasibility(const Surrogate& g, const Eigen::MatrixXd& candidates, double beta_sqrt) {
  return g.lcb(candidates, beta_sqrt).minCoeff() <= 0.0;
}

int propose_next(const Surrogate& j, const Surrogate& g, const Eigen::MatrixXd& candidates, double beta_sqrt) {
  const Eigen::VectorXd lj = j.lcb(candidates, beta_sqrt);
  const Eigen::VectorXd lg = g.lcb(candidates, beta_sqrt);
  int best = -1;
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    if (lg(i) <= 0.0 && (best < 0 || lj(i) < lj(best))) best = static_cast<int>(i);
  }
  if (best < 0) throw Error(ErrorCode::NoFeasibleCandidate, "no candidate with constraint LCB <= 0");
  return best;
}

TuningResult run_config(const Blackbox& blackbox, const ConfigParams& params, const RunOptions& options) {
  params.validate();
  TuningResult result;
  std::size_t replayed = 0;

  auto evaluate = [&](const std::vector<double>& theta) {
    const int k = static_cast<int>(result.history.size()) + 1;
    EvalRecord rec;
    if (replayed < options.resume.size()) {
      rec = options.resume[replayed++];
      if (rec.iteration != k || rec.theta.size() != theta.size()) {
        throw Error(ErrorCode::InvalidArgument, "resume log does not match run at iteration " + std::to_string(k));
      }
      for (std::size_t i = 0; i < theta.size(); ++i) {
        if (std::abs(rec.theta[i] - theta[i]) > 1e-9 * (1.0 + std::abs(theta[i]))) {
          throw Error(ErrorCode::InvalidArgument, "resume log diverges from proposals at iteration " + std::to_string(k));
        }
      }
      rec.theta = theta;
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      BlackboxValue v;
      try {
        v = blackbox(theta);
      } catch (const std::exception& e) {
        std::string where = "iteration " + std::to_string(k) + ", theta [";
        for (std::size_t i = 0; i < theta.size(); ++i) where += (i ? ", " : "") + std::to_string(theta[i]);
        throw Error(ErrorCode::BlackboxFailure, where + "]: " + e.what());
      }
      if (!std::isfinite(v.j) || !std::isfinite(v.g)) {
        throw Error(ErrorCode::BlackboxFailure, "non-finite result at iteration " + std::to_string(k));
      }
      rec.iteration = k;
      rec.theta = theta;
      rec.j_value = v.j;
      rec.g_value = v.g;
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (options.on_record) options.on_record(rec);
    }
    if (better(rec, result.best_feasible)) result.best_feasible = rec;
    result.history.push_back(std::move(rec));
  };

  const int n_init = std::min(params.n_init, params.max_iters);
  const Eigen::MatrixXd init = latin_hypercube(n_init, params.dim(), params.seed);
  for (int i = 0; i < n_init; ++i) evaluate(from_unit(params, init.row(i).transpose()));

  while (static_cast<int>(result.history.size()) < params.max_iters) {
    const int k = static_cast<int>(result.history.size()) + 1;
    const Eigen::MatrixXd x = unit_matrix(params, result.history);
    Eigen::VectorXd yj(result.history.size()), yg(result.history.size());
    for (std::size_t i = 0; i < result.history.size(); ++i) {
      yj(i) = result.history[i].j_value;
      yg(i) = result.history[i].g_value;
    }
    const Surrogate sj = fit_surrogate(x, yj, params);
    const Surrogate sg = fit_surrogate(x, yg, params);

    const EvalRecord* anchor = result.best_feasible ? &*result.best_feasible : nullptr;
    if (!anchor) {
      anchor = &*std::min_element(result.history.begin(), result.history.end(),
                                  [](const EvalRecord& a, const EvalRecord& b) { return a.g_value < b.g_value; });
    }
    const Eigen::VectorXd incumbent = to_unit(params, anchor->theta);
    const Eigen::MatrixXd cands = candidate_set(params, k, &incumbent);
    const double beta = params.beta_sqrt(static_cast<int>(result.history.size()));

    if (!check_feasibility(sg, cands, beta)) {
      result.infeasibility_declared = true;
      break;
    }
    const int idx = propose_next(sj, sg, cands, beta);
    evaluate(from_unit(params, cands.row(idx).transpose()));
  }
  return result;
}

std::string record_to_json(const EvalRecord& r) {
  nlohmann::json j;
  j["k"] = r.iteration;
  j["theta"] = r.theta;
  j["j_eur"] = r.j_value;
  j["g"] = r.g_value;
  j["feasible"] = r.feasible();
  j["wall_s"] = r.wall_time_s;
  return j.dump();
}

EvalRecord record_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    EvalRecord r;
    r.iteration = j.at("k").get<int>();
    r.theta = j.at("theta").get<std::vector<double>>();
    r.j_value = j.at("j_eur").get<double>();
    r.g_value = j.at("g").get<double>();
    r.wall_time_s = j.value("wall_s", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("run log line: ") + e.what());
  }
}

std::vector<EvalRecord> read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(record_from_json(line));
  }
  return out;
}

}  // namespace hptune
