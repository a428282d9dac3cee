#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hptune/error.hpp"
#include "hptune/harness.hpp"

using namespace hptune;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string theta_str(const Theta& t) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "u_low=%.4f u_max=%.4f t_lb_occ=%.3f t_lb_unocc=%.3f", t.u_low, t.u_max, t.t_lb_occ,
                t.t_lb_unocc);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop MPC auto-tuning and tariff comparison for a heat-pump building"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = "out";
  app.add_option("--seed", seed, "Tuning seed");
  app.add_option("--config", config_path, "Experiment TOML")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");

  std::string month = "jan";
  std::string contract;
  std::string controller;
  int days = -1;
  std::vector<double> theta_values;

  auto* identify = app.add_subcommand("identify", "Identify and save the ARX model of a month");
  identify->add_option("--month", month);

  auto* simulate_cmd = app.add_subcommand("simulate", "Run one closed loop and bill it");
  simulate_cmd->add_option("--month", month);
  simulate_cmd->add_option("--contract", contract);
  simulate_cmd->add_option("--controller", controller, "baseline, qp, miqp or mask");
  simulate_cmd->add_option("--days", days);
  simulate_cmd->add_option("--theta", theta_values, "u_low u_max t_lb_occ t_lb_unocc")->expected(4);

  auto* tune = app.add_subcommand("tune", "Tune Mask MPC for one contract and month");
  tune->add_option("--month", month);
  tune->add_option("--contract", contract);
  tune->add_option("--days", days);

  auto* compare = app.add_subcommand("compare", "Tune every contract/month/seed cell and emit the report");
  auto* baselines = app.add_subcommand("baselines", "Rule-based, expert QP MPC and MIQP MPC on one scenario");
  baselines->add_option("--month", month);
  baselines->add_option("--contract", contract);
  baselines->add_option("--days", days);

  std::string results_path;
  auto* report = app.add_subcommand("report", "Re-emit the report from a saved results.json");
  report->add_option("--in", results_path)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_experiment(config_path);
    if (config_path.empty()) {
      for (const auto& c : cfg.base.contracts) cfg.contracts.push_back(c.code);
    }
    ExperimentSpec spec = cfg.base;
    spec.seed = seed;
    if (!contract.empty()) spec.contract_code = contract;
    if (days >= 0) spec.days = days;
    const bool month_given = identify->count("--month") + simulate_cmd->count("--month") + tune->count("--month") +
                             baselines->count("--month") > 0;
    if (month_given || config_path.empty()) spec.month = parse_month(month);
    const fs::path out(out_dir);

    if (*identify) {
      const WeatherSeries w = month_weather(spec);
      const ArxModel model = identify_arx(spec, w);
      save_arx(out / ("arx_" + month_name(spec.month) + ".json"), model);
      save_weather(out / ("weather_" + month_name(spec.month) + ".csv"), w);
      std::printf("ARX %s: fit RMSE %.4f K, spectral radius %.4f\n", month_name(spec.month).c_str(), model.fit_rmse,
                  model.spectral_radius());
    } else if (*simulate_cmd) {
      const Scenario sc = prepare_scenario(spec);
      const ControllerType kind = controller.empty() ? spec.controller : parse_controller(controller);
      const Theta theta = theta_values.empty() ? expert_theta() : Theta::from_vector(theta_values);
      const EvalOutput e = simulate(sc, kind, theta);
      save_trace(out / "trace.csv", e.trace);
      write_text(out / "bill.csv", bill_csv({{sc.contract.code, month_name(spec.month), e.bill}}));
      if (!e.mpc_log.empty()) write_text(out / "mpc_log.jsonl", mpc_log_jsonl(e.mpc_log));
      std::printf("%s %s %s: bill %s EUR, peak %.3f kW, PMV-CDF80 %.4f, g %.4f\n", controller_name(kind).c_str(),
                  sc.contract.code.c_str(), month_name(spec.month).c_str(), format_euro(e.bill.total_pico, 2).c_str(),
                  e.bill.peak_kw, e.comfort.pmv_cdf_80, e.g);
    } else if (*tune) {
      const Scenario sc = prepare_scenario(spec);
      const fs::path log = out / ("tune_" + sc.contract.code + "_" + month_name(spec.month) + ".jsonl");
      const TuneOutput t = tune_contract(sc, log);
      if (t.result.infeasibility_declared) std::printf("infeasibility declared\n");
      if (t.result.best_feasible) {
        std::printf("best feasible: %s -> %.4f EUR (g %.4f) at k=%d\n",
                    theta_str(Theta::from_vector(t.result.best_feasible->theta)).c_str(),
                    t.result.best_feasible->j_value, t.result.best_feasible->g_value, t.result.best_feasible->iteration);
      } else {
        std::printf("no feasible theta found\n");
      }
    } else if (*compare) {
      const ComparisonResult r = compare_contracts(spec, cfg.months, cfg.contracts, cfg.seeds);
      emit_report(r, out);
      for (const auto& rep : r.reports) {
        std::printf("seed %llu\n%s\n", static_cast<unsigned long long>(rep.seed), table5_markdown(rep).c_str());
      }
      int failed = 0;
      for (const auto& c : r.cells) failed += c.ok ? 0 : 1;
      if (failed > 0) std::printf("%d cell(s) failed; see failed_cells.csv\n", failed);
    } else if (*baselines) {
      const Scenario sc = prepare_scenario(spec);
      std::vector<BillRow> rows;
      std::string comfort = "controller,pmv_cdf_80,g,mean_solve_ms,max_u\n";
      for (const auto& b : run_baselines(sc)) {
        rows.push_back({controller_name(b.controller), month_name(spec.month), b.bill});
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.4f,%.6f\n", controller_name(b.controller).c_str(),
                      b.comfort.pmv_cdf_80, b.comfort.g_value, b.mean_solve_ms, b.max_u);
        comfort += buf;
        std::printf("%-8s bill %10s EUR  g %+.4f  solve %.3f ms/step\n", controller_name(b.controller).c_str(),
                    format_euro(b.bill.total_pico, 2).c_str(), b.comfort.g_value, b.mean_solve_ms);
      }
      // The contract column holds the controller name here.
      write_text(out / "baselines_bills.csv", bill_csv(rows));
      write_text(out / "baselines_comfort.csv", comfort);
    } else if (*report) {
      emit_report(comparison_from_json(read_text(results_path)), out);
      std::printf("report written to %s\n", out.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
