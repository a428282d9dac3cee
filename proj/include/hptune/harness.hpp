#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hptune/billing.hpp"
#include "hptune/building_sim.hpp"
#include "hptune/comfort_pmv.hpp"
#include "hptune/config_optimizer.hpp"
#include "hptune/core_model.hpp"
#include "hptune/mpc_controllers.hpp"
#include "hptune/sysid_arx.hpp"

namespace hptune {

enum class Month { Nov, Dec, Jan, Feb };

std::string month_name(Month m);  // "nov", ...
Month parse_month(const std::string& name);
unsigned month_number(Month m);
/// First day of the synthetic heating-season calendar (2023-11 ... 2024-02).
Timestamp month_start(Month m);
int days_in_month(Month m);

struct Theta {
  double u_low = 0.0;
  double u_max = 1.0;
  double t_lb_occ = 21.5;
  double t_lb_unocc = 16.0;

  void validate() const;
  std::vector<double> to_vector() const { return {u_low, u_max, t_lb_occ, t_lb_unocc}; }
  static Theta from_vector(const std::vector<double>& v);
};

/// Tuning box: u_low [0, 0.8], u_max [0.8, 1], t_lb_occ [21, 23], t_lb_unocc [15, 18].
std::vector<std::pair<double, double>> theta_domain();
/// Hand-set QP MPC parameters used as the untuned reference.
Theta expert_theta();

enum class ControllerType { Baseline, QP, MIQP, Mask };
std::string controller_name(ControllerType c);
ControllerType parse_controller(const std::string& name);

struct WeatherSpec {
  std::optional<std::filesystem::path> file;  // CSV covering the whole month
  std::optional<double> mean_temp;            // per-month default when absent
  double daily_amp = 4.0;
  double noise_std = 1.0;
  std::optional<double> solar_peak;
  std::uint64_t seed = 2023;
};

struct ExperimentSpec {
  Month month = Month::Jan;
  std::string contract_code = "ddd";
  ControllerType controller = ControllerType::Mask;
  std::uint64_t seed = 0;  // tuning seed
  WeatherSpec weather;
  ConfigParams config_params = default_config_params();

  int start_day = 1;  // 1-based day of month
  int days = 0;       // 0 = rest of the month
  int max_steps = 0;  // 0 = no cap

  BuildingParams plant;
  HeatPumpModel hp;
  OccupancySchedule schedule;
  PlantState init{21.0, 21.0};
  MpcConfig mpc;  // horizon, R, S and upper bounds; lower bounds/u_max/u_low come from Theta
  int miqp_node_limit = 10000;
  ComfortConditions comfort;

  int arx_na = 4;
  int arx_nb = 4;
  int arx_td = 1;
  PrbsConfig prbs;
  double arx_noise_std = 0.05;
  std::filesystem::path arx_cache_dir;  // empty = in-memory only

  std::vector<Contract> contracts = default_contracts();

  static ConfigParams default_config_params();
};

/// Identified models shared across runs, keyed by month and plant/weather settings.
class ArxCache {
 public:
  ArxModel get(const ExperimentSpec& spec, const WeatherSeries& month_weather);
  static std::string key(const ExperimentSpec& spec);

 private:
  std::mutex mutex_;
  std::map<std::string, ArxModel> models_;
};

ArxCache& global_arx_cache();

/// Month weather, simulation window and identified model for one spec.
struct Scenario {
  ExperimentSpec spec;
  WeatherSeries month_weather;
  WeatherSeries weather;  // simulated window
  ArxModel arx;
  Contract contract;
  unsigned month = 1;
};

WeatherSeries month_weather(const ExperimentSpec& spec);
ArxModel identify_arx(const ExperimentSpec& spec, const WeatherSeries& month_weather);
Scenario prepare_scenario(const ExperimentSpec& spec, ArxCache& cache = global_arx_cache());

struct EvalOutput {
  double j = 0.0;
  double g = 0.0;
  SimTrace trace;
  BillBreakdown bill;
  ComfortStats comfort;
  std::vector<MpcStepLog> mpc_log;
};

/// Closed-loop run of one controller; Theta is ignored by the rule-based baseline.
EvalOutput simulate(const Scenario& sc, ControllerType controller, const Theta& theta);

/// Mask MPC with `theta`: j = monthly bill, g = PMV-CDF constraint value.
EvalOutput evaluate_theta(const Theta& theta, const Scenario& sc);

struct TuneOutput {
  TuningResult result;
  std::string run_log;  // JSONL
};

/// CONFIG over the Theta box with `evaluate_theta` as black box. Writes the JSONL log to
/// `log_path` when given, resuming from it if it already holds records.
TuneOutput tune_contract(const Scenario& sc, const std::optional<std::filesystem::path>& log_path = std::nullopt);

struct CellOutcome {
  std::string contract;
  Month month = Month::Jan;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  TuningResult tuning;
  std::string run_log;
  std::optional<Theta> best_theta;
  std::optional<BillBreakdown> best_bill;
  std::optional<ComfortStats> best_comfort;
};

struct ContractReport {
  std::uint64_t seed = 0;
  std::vector<std::string> contracts;
  std::vector<std::string> months;  // column labels; "total" appended when more than one month
  /// Optimal bill in cents per [contract][column]; absent when the cell failed or found nothing feasible.
  std::vector<std::vector<std::optional<std::int64_t>>> cents;
  std::vector<std::optional<std::int64_t>> best_cents, worst_cents, sp_cents;
  std::vector<std::optional<double>> saving_ratio;
  std::string best_contract;  // minimum of the last column
};

struct ComparisonResult {
  std::vector<CellOutcome> cells;
  std::vector<ContractReport> reports;  // one per seed
};

/// Tunes every (contract, month, seed) cell on the OpenMP pool. Failed cells are reported,
/// the others complete.
ComparisonResult compare_contracts(const ExperimentSpec& base, const std::vector<Month>& months,
                                   const std::vector<std::string>& codes, const std::vector<std::uint64_t>& seeds);

ContractReport build_report(const std::vector<CellOutcome>& cells, std::uint64_t seed,
                            const std::vector<std::string>& codes, const std::vector<Month>& months);

/// Cents, rounded half away from zero.
std::int64_t pico_to_cents(std::int64_t pico);

struct BaselineEntry {
  ControllerType controller = ControllerType::Baseline;
  BillBreakdown bill;
  ComfortStats comfort;
  double mean_solve_ms = 0.0;
  double max_u = 0.0;
  SimTrace trace;
};

/// Rule-based, expert QP MPC and MIQP MPC on one scenario.
std::vector<BaselineEntry> run_baselines(const Scenario& sc);

/// Writes bill CSVs, Table-5 Markdown, PMV-CDF curves and run logs under `out_dir`.
void emit_report(const ComparisonResult& results, const std::filesystem::path& out_dir);
std::string table5_markdown(const ContractReport& report);
/// `abs_pmv,quantile` rows of the empirical CDF.
std::string pmv_cdf_csv(const std::vector<double>& pmv_series);

std::string comparison_to_json(const ComparisonResult& r);
ComparisonResult comparison_from_json(const std::string& text);

/// Experiment TOML: `[experiment]`, `[budget]`, `[plant]`, `[heat_pump]`, `[mpc]`, `[weather]`,
/// `[[contract]]`.
struct ExperimentConfig {
  ExperimentSpec base;
  std::vector<Month> months{Month::Jan};
  std::vector<std::string> contracts;
  std::vector<std::uint64_t> seeds{0};
};
ExperimentConfig load_experiment_text(const std::string& toml_text);
ExperimentConfig load_experiment(const std::filesystem::path& path);

}  // namespace hptune
