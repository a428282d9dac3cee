#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hptune/building_sim.hpp"
#include "hptune/core_model.hpp"

namespace hptune {

/// Number of exogenous ARX input channels: modulation u, outdoor temperature, solar irradiance.
inline constexpr int kArxInputs = 3;

/// A(q) y(t) = B(q) u_arx(t - t_d), with
///   y(t) = -sum_i a[i] y(t-1-i) + sum_j sum_c b(j, c) u_c(t - t_d - j).
struct ArxModel {
  int na = 4;
  int nb = 4;
  int t_d = 1;
  std::vector<double> a;  // length na, leading 1 omitted
  Eigen::MatrixXd b;      // nb x kArxInputs
  double fit_rmse = 0.0;  // one-step residual RMS on the training data

  void validate() const;
  /// All roots of A(q) strictly inside the unit circle.
  bool is_stable() const;
  /// Largest root modulus of A(q).
  double spectral_radius() const;

  /// Rows of the input window `predict` expects before the first predicted step.
  int past_rows() const { return nb + t_d; }
};

struct PrbsConfig {
  int hold_steps = 4;
  double low = 0.0;
  double high = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

std::vector<double> generate_prbs(const PrbsConfig& cfg, int n_steps);

/// Least-squares ARX fit. `u_arx` is n x kArxInputs, aligned with `y`.
ArxModel fit_arx(const std::vector<double>& y, const Eigen::MatrixXd& u_arx, int na, int nb, int t_d);

/// Multi-step simulation of the model.
/// `y_hist`: outputs up to and including the current time t0 (oldest first, >= na values).
/// `u_window`: rows for times t0 - past_rows() + 1 ... t0 + horizon (at least past_rows() + horizon rows).
/// Returns y(t0 + 1) ... y(t0 + horizon).
std::vector<double> predict(const ArxModel& model, const std::vector<double>& y_hist,
                            const Eigen::MatrixXd& u_window, int horizon);

std::string arx_to_json(const ArxModel& model);
ArxModel arx_from_json(const std::string& text);
void save_arx(const std::filesystem::path& path, const ArxModel& model);
ArxModel load_arx(const std::filesystem::path& path);

/// Plant data for identification: PRBS-driven open-loop run.
struct IdentificationData {
  std::vector<double> y;     // measured indoor temperature
  Eigen::MatrixXd u_arx;     // n x 3: u, t_out, solar
};

IdentificationData collect_prbs_data(const BuildingParams& params, const HeatPumpModel& hp,
                                     const WeatherSeries& weather, const OccupancySchedule& schedule,
                                     const PrbsConfig& prbs, double measurement_noise_std,
                                     std::uint64_t noise_seed, const PlantState& init = {});

}  // namespace hptune
