#include "hptune/sysid_arx.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hptune/error.hpp"

namespace hptune {

void ArxModel::validate() const {
  if (na < 1 || nb < 1 || t_d < 0) throw Error(ErrorCode::InvalidArgument, "ARX needs na >= 1, nb >= 1, t_d >= 0");
  if (static_cast<int>(a.size()) != na || b.rows() != nb || b.cols() != kArxInputs) {
    throw Error(ErrorCode::InvalidArgument, "ARX coefficient shapes do not match orders");
  }
  for (double v : a) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite ARX coefficient");
  }
  if (!b.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite ARX coefficient");
}

double ArxModel::spectral_radius() const {
  // Companion matrix of z^na + a1 z^(na-1) + ... + a_na.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(na, na);
  for (int i = 0; i < na; ++i) companion(0, i) = -a[i];
  for (int i = 1; i < na; ++i) companion(i, i - 1) = 1.0;
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

bool ArxModel::is_stable() const { return spectral_radius() < 1.0; }

void PrbsConfig::validate() const {
  if (hold_steps < 1 || !(low >= 0.0 && low < high && high <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "PRBS needs hold_steps >= 1 and 0 <= low < high <= 1");
  }
}

std::vector<double> generate_prbs(const PrbsConfig& cfg, int n_steps) {
  cfg.validate();
  if (n_steps < cfg.hold_steps) throw Error(ErrorCode::InvalidArgument, "PRBS needs n_steps >= hold_steps");

  // Maximal-length 15-bit LFSR (x^15 + x^14 + 1), period 32767 blocks.
  std::uint32_t reg = static_cast<std::uint32_t>(std::mt19937_64(cfg.seed)() & 0x7FFFu);
  if (reg == 0) reg = 1;
  const int blocks = (n_steps + cfg.hold_steps - 1) / cfg.hold_steps;
  std::vector<int> bits(blocks);
  for (int k = 0; k < blocks; ++k) {
    const std::uint32_t bit = ((reg >> 14) ^ (reg >> 13)) & 1u;
    reg = ((reg << 1) | bit) & 0x7FFFu;
    bits[k] = static_cast<int>(bit);
  }
  if (blocks >= 2) {
    bool all_same = true;
    for (int k = 1; k < blocks; ++k) all_same = all_same && bits[k] == bits[0];
    if (all_same) bits.back() ^= 1;
  }

  std::vector<double> out(n_steps);
  for (int i = 0; i < n_steps; ++i) out[i] = bits[i / cfg.hold_steps] ? cfg.high : cfg.low;
  return out;
}

ArxModel fit_arx(const std::vector<double>& y, const Eigen::MatrixXd& u_arx, int na, int nb, int t_d) {
  if (na < 1 || nb < 1 || t_d < 0) throw Error(ErrorCode::InvalidArgument, "ARX needs na >= 1, nb >= 1, t_d >= 0");
  const int n = static_cast<int>(y.size());
  if (u_arx.rows() != n || u_arx.cols() != kArxInputs) {
    throw Error(ErrorCode::InvalidArgument, "u_arx must be n x 3 and aligned with y");
  }
  if (n <= na + nb + t_d + 10) throw Error(ErrorCode::InsufficientData, "series too short for requested orders");

  const int first = std::max(na, t_d + nb - 1);
  const int rows = n - first;
  const int cols = na + nb * kArxInputs;
  if (rows < cols) throw Error(ErrorCode::InsufficientData, "fewer equations than coefficients");

  Eigen::MatrixXd phi(rows, cols);
  Eigen::VectorXd target(rows);
  for (int r = 0; r < rows; ++r) {
    const int t = first + r;
    for (int i = 0; i < na; ++i) phi(r, i) = -y[t - 1 - i];
    for (int j = 0; j < nb; ++j) {
      for (int c = 0; c < kArxInputs; ++c) phi(r, na + j * kArxInputs + c) = u_arx(t - t_d - j, c);
    }
    target(r) = y[t];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) throw Error(ErrorCode::RankDeficient, "regressor matrix is rank deficient");
  const Eigen::VectorXd theta = qr.solve(target);

  ArxModel m;
  m.na = na;
  m.nb = nb;
  m.t_d = t_d;
  m.a.assign(theta.data(), theta.data() + na);
  m.b.resize(nb, kArxInputs);
  for (int j = 0; j < nb; ++j) {
    for (int c = 0; c < kArxInputs; ++c) m.b(j, c) = theta(na + j * kArxInputs + c);
  }
  m.fit_rmse = std::sqrt((phi * theta - target).squaredNorm() / rows);
  m.validate();
  if (!m.is_stable()) {
    throw Error(ErrorCode::UnstableModel,
                "fitted A(q) has a root of modulus " + std::to_string(m.spectral_radius()));
  }
  return m;
}

std::vector<double> predict(const ArxModel& model, const std::vector<double>& y_hist,
                            const Eigen::MatrixXd& u_window, int horizon) {
  if (static_cast<int>(y_hist.size()) < model.na) throw Error(ErrorCode::HistoryTooShort, "y history shorter than na");
  const int past = model.past_rows();
  if (horizon < 0 || u_window.rows() < past + horizon || u_window.cols() != kArxInputs) {
    throw Error(ErrorCode::HistoryTooShort, "input window shorter than nb + t_d + horizon");
  }

  // ys[s + hist - 1] holds y(t0 + s).
  const int hist = model.na;
  std::vector<double> ys(hist + horizon);
  for (int i = 0; i < hist; ++i) ys[i] = y_hist[y_hist.size() - hist + i];

  for (int k = 1; k <= horizon; ++k) {
    double v = 0.0;
    for (int i = 0; i < model.na; ++i) v -= model.a[i] * ys[hist - 1 + k - 1 - i];
    for (int j = 0; j < model.nb; ++j) {
      const int row = k - model.t_d - j + past - 1;
      for (int c = 0; c < kArxInputs; ++c) v += model.b(j, c) * u_window(row, c);
    }
    ys[hist - 1 + k] = v;
  }
  return {ys.begin() + hist, ys.end()};
}

std::string arx_to_json(const ArxModel& model) {
  nlohmann::json j;
  j["na"] = model.na;
  j["nb"] = model.nb;
  j["t_d"] = model.t_d;
  j["a"] = model.a;
  std::vector<double> b;
  for (int r = 0; r < model.b.rows(); ++r) {
    for (int c = 0; c < model.b.cols(); ++c) b.push_back(model.b(r, c));
  }
  j["b"] = b;
  j["fit_rmse"] = model.fit_rmse;
  return j.dump(2);
}

ArxModel arx_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ArxModel m;
    m.na = j.at("na").get<int>();
    m.nb = j.at("nb").get<int>();
    m.t_d = j.at("t_d").get<int>();
    m.a = j.at("a").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    if (m.nb < 1 || static_cast<int>(b.size()) != m.nb * kArxInputs) {
      throw Error(ErrorCode::ParseError, "ARX JSON 'b' must hold nb*3 values");
    }
    m.b.resize(m.nb, kArxInputs);
    for (int r = 0; r < m.nb; ++r) {
      for (int c = 0; c < kArxInputs; ++c) m.b(r, c) = b[r * kArxInputs + c];
    }
    m.fit_rmse = j.value("fit_rmse", 0.0);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("ARX JSON: ") + e.what());
  }
}

void save_arx(const std::filesystem::path& path, const ArxModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << arx_to_json(model) << '\n';
}

ArxModel load_arx(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return arx_from_json(ss.str());
}

IdentificationData collect_prbs_data(const BuildingParams& params, const HeatPumpModel& hp,
                                     const WeatherSeries& weather, const OccupancySchedule& schedule,
                                     const PrbsConfig& prbs, double measurement_noise_std,
                                     std::uint64_t noise_seed, const PlantState& init) {
  const auto u = generate_prbs(prbs, weather.grid.n_steps);
  const ControlPolicy open_loop = [&u](const StepContext& ctx) { return u[ctx.step]; };
  const SimTrace trace = run_closed_loop(params, hp, open_loop, weather, schedule, init);

  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  IdentificationData data;
  const int n = weather.grid.n_steps;
  data.y.resize(n);
  data.u_arx.resize(n, kArxInputs);
  for (int i = 0; i < n; ++i) {
    data.y[i] = trace.t_in[i] + (measurement_noise_std > 0.0 ? measurement_noise_std * noise(rng) : 0.0);
    data.u_arx(i, 0) = trace.u[i];
    data.u_arx(i, 1) = weather.t_out[i];
    data.u_arx(i, 2) = weather.solar[i];
  }
  return data;
}

}  // namespace hptune
