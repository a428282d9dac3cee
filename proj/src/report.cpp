#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hptune/error.hpp"
#include "hptune/harness.hpp"

namespace hptune {

namespace {

std::string cents_str(std::int64_t cents) {
  const bool neg = cents < 0;
  const std::int64_t mag = neg ? -cents : cents;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", neg ? "-" : "", static_cast<long long>(mag / 100),
                static_cast<long long>(mag % 100));
  return buf;
}

std::string opt_cents(const std::optional<std::int64_t>& v) { return v ? cents_str(*v) : "n/a"; }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

nlohmann::json bill_json(const BillBreakdown& b) {
  return {{"energy_pico", b.energy_pico}, {"capacity_pico", b.capacity_pico}, {"fixed_pico", b.fixed_pico},
          {"total_pico", b.total_pico},   {"peak_kw", b.peak_kw},             {"day_kwh", b.day_kwh},
          {"night_kwh", b.night_kwh}};
}

BillBreakdown bill_from(const nlohmann::json& j) {
  BillBreakdown b;
  b.energy_pico = j.at("energy_pico");
  b.capacity_pico = j.at("capacity_pico");
  b.fixed_pico = j.at("fixed_pico");
  b.total_pico = j.at("total_pico");
  b.peak_kw = j.at("peak_kw");
  b.day_kwh = j.at("day_kwh");
  b.night_kwh = j.at("night_kwh");
  return b;
}

}  // namespace

std::string table5_markdown(const ContractReport& r) {
  std::string out = "| Pricing case |";
  std::string rule = "|---|";
  for (const auto& m : r.months) {
    out += " " + m + " |";
    rule += "---:|";
  }
  out += "\n" + rule + "\n";
  for (std::size_t c = 0; c < r.contracts.size(); ++c) {
    out += "| " + r.contracts[c] + " |";
    for (const auto& v : r.cents[c]) out += " " + opt_cents(v) + " |";
    out += "\n";
  }
  auto row = [&](const std::string& label, const std::vector<std::optional<std::int64_t>>& v) {
    out += "| " + label + " |";
    for (const auto& x : v) out += " " + opt_cents(x) + " |";
    out += "\n";
  };
  row("Best", r.best_cents);
  row("Worst", r.worst_cents);
  row("SP", r.sp_cents);
  out += "| SR |";
  for (const auto& x : r.saving_ratio) {
    char buf[32];
    if (x) std::snprintf(buf, sizeof buf, " %.2f%% |", 100.0 * *x);
    else std::snprintf(buf, sizeof buf, " n/a |");
    out += buf;
  }
  out += "\n\nBest contract: " + (r.best_contract.empty() ? std::string("n/a") : r.best_contract) + "\n";
  return out;
}

std::string pmv_cdf_csv(const std::vector<double>& pmv_series) {
  std::vector<double> a(pmv_series.size());
  std::transform(pmv_series.begin(), pmv_series.end(), a.begin(), [](double v) { return std::abs(v); });
  std::sort(a.begin(), a.end());
  std::string out = "abs_pmv,quantile\n";
  char buf[64];
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", a[i], double(i + 1) / double(a.size()));
    out += buf;
  }
  return out;
}

void emit_report(const ComparisonResult& results, const std::filesystem::path& out_dir) {
  if (results.cells.empty() || results.reports.empty()) throw Error(ErrorCode::InvalidArgument, "no results to report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string());

  for (const auto& rep : results.reports) {
    const auto dir = out_dir / ("seed_" + std::to_string(rep.seed));
    std::filesystem::create_directories(dir / "runs", ec);
    std::filesystem::create_directories(dir / "pmv_cdf", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());

    std::vector<BillRow> rows;
    std::string failures;
    for (const auto& c : results.cells) {
      if (c.seed != rep.seed) continue;
      const std::string stem = c.contract + "_" + month_name(c.month);
      if (c.best_bill) rows.push_back({c.contract, month_name(c.month), *c.best_bill});
      if (!c.ok) failures += c.contract + "," + month_name(c.month) + "," + c.error + "\n";
      if (!c.run_log.empty()) write_file(dir / "runs" / (stem + ".jsonl"), c.run_log);
      if (c.best_comfort) write_file(dir / "pmv_cdf" / (stem + ".csv"), pmv_cdf_csv(c.best_comfort->pmv_series));
    }
    write_file(dir / "bills.csv", bill_csv(rows));
    write_file(dir / "table5.md", table5_markdown(rep));
    write_file(dir / "failed_cells.csv", "contract,month,error\n" + failures);
  }
  write_file(out_dir / "results.json", comparison_to_json(results));
}

std::string comparison_to_json(const ComparisonResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json j;
    j["contract"] = c.contract;
    j["month"] = month_name(c.month);
    j["seed"] = c.seed;
    j["ok"] = c.ok;
    j["error"] = c.error;
    j["infeasibility_declared"] = c.tuning.infeasibility_declared;
    j["run_log"] = c.run_log;
    if (c.best_theta) j["best_theta"] = c.best_theta->to_vector();
    if (c.best_bill) j["best_bill"] = bill_json(*c.best_bill);
    if (c.best_comfort) {
      j["pmv_series"] = c.best_comfort->pmv_series;
      j["pmv_cdf_80"] = c.best_comfort->pmv_cdf_80;
    }
    cells.push_back(std::move(j));
  }
  nlohmann::json seeds = nlohmann::json::array();
  std::vector<std::string> months;
  std::vector<std::string> codes;
  if (!r.reports.empty()) {
    codes = r.reports.front().contracts;
    for (const auto& m : r.reports.front().months) {
      if (m != "total") months.push_back(m);
    }
  }
  for (const auto& rep : r.reports) seeds.push_back(rep.seed);
  nlohmann::json root = {{"cells", cells}, {"seeds", seeds}, {"months", months}, {"contracts", codes}};
  return root.dump(1) + "\n";
}

ComparisonResult comparison_from_json(const std::string& text) {
  ComparisonResult r;
  try {
    const auto root = nlohmann::json::parse(text);
    for (const auto& j : root.at("cells")) {
      CellOutcome c;
      c.contract = j.at("contract");
      c.month = parse_month(j.at("month"));
      c.seed = j.at("seed");
      c.ok = j.at("ok");
      c.error = j.at("error");
      c.tuning.infeasibility_declared = j.value("infeasibility_declared", false);
      c.run_log = j.value("run_log", std::string());
      std::size_t pos = 0;
      while (pos < c.run_log.size()) {
        const auto end = c.run_log.find('\n', pos);
        const std::string line = c.run_log.substr(pos, end - pos);
        if (!line.empty()) {
          c.tuning.history.push_back(record_from_json(line));
          const auto& rec = c.tuning.history.back();
          if (rec.feasible() && (!c.tuning.best_feasible || rec.j_value < c.tuning.best_feasible->j_value)) {
            c.tuning.best_feasible = rec;
          }
        }
        if (end == std::string::npos) break;
        pos = end + 1;
      }
      if (j.contains("best_theta")) c.best_theta = Theta::from_vector(j.at("best_theta").get<std::vector<double>>());
      if (j.contains("best_bill")) c.best_bill = bill_from(j.at("best_bill"));
      if (j.contains("pmv_series")) c.best_comfort = comfort_from_pmv(j.at("pmv_series").get<std::vector<double>>());
      r.cells.push_back(std::move(c));
    }
    std::vector<Month> months;
    for (const auto& m : root.at("months")) months.push_back(parse_month(m));
    const auto codes = root.at("contracts").get<std::vector<std::string>>();
    for (const auto& s : root.at("seeds")) r.reports.push_back(build_report(r.cells, s.get<std::uint64_t>(), codes, months));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("results file: ") + e.what());
  }
  return r;
}

}  // namespace hptune
