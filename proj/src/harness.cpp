#include "hptune/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <toml.hpp>

#include "hptune/error.hpp"
#include "hptune/kernels.hpp"

namespace hptune {

namespace {

struct MonthInfo {
  Month month;
  const char* name;
  int year;
  unsigned number;
  int days;
  double mean_temp;
  double solar_peak;
};

constexpr std::array<MonthInfo, 4> kMonths = {{
    {Month::Nov, "nov", 2023, 11, 30, 7.0, 250.0},
    {Month::Dec, "dec", 2023, 12, 31, 4.0, 150.0},
    {Month::Jan, "jan", 2024, 1, 31, 3.0, 200.0},
    {Month::Feb, "feb", 2024, 2, 28, 4.0, 300.0},
}};

const MonthInfo& info(Month m) { return kMonths[static_cast<int>(m)]; }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

WeatherSeries slice(const WeatherSeries& w, int first, int count) {
  WeatherSeries out;
  out.grid = TimeGrid(w.grid.at(first), w.grid.step_seconds, count);
  out.t_out.assign(w.t_out.begin() + first, w.t_out.begin() + first + count);
  out.solar.assign(w.solar.begin() + first, w.solar.begin() + first + count);
  return out;
}

MpcConfig mpc_config(const ExperimentSpec& spec, const Theta& theta) {
  MpcConfig cfg = spec.mpc;
  cfg.u_low = theta.u_low;
  cfg.u_max = theta.u_max;
  cfg.t_lb_occ = theta.t_lb_occ;
  cfg.t_lb_unocc = theta.t_lb_unocc;
  return cfg;
}

}  // namespace

std::string month_name(Month m) { return info(m).name; }

Month parse_month(const std::string& name) {
  for (const auto& mi : kMonths) {
    if (name == mi.name) return mi.month;
  }
  throw Error(ErrorCode::InvalidArgument, "month must be one of nov, dec, jan, feb: " + name);
}

unsigned month_number(Month m) { return info(m).number; }
Timestamp month_start(Month m) { return make_timestamp(info(m).year, info(m).number, 1); }
int days_in_month(Month m) { return info(m).days; }

void Theta::validate() const {
  const auto dom = theta_domain();
  const auto v = to_vector();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= dom[i].first && v[i] <= dom[i].second)) {
      throw Error(ErrorCode::InvalidArgument, "theta component " + std::to_string(i) + " outside tuning range");
    }
  }
}

Theta Theta::from_vector(const std::vector<double>& v) {
  if (v.size() != 4) throw Error(ErrorCode::InvalidArgument, "theta needs 4 components");
  return {v[0], v[1], v[2], v[3]};
}

std::vector<std::pair<double, double>> theta_domain() { return {{0.0, 0.8}, {0.8, 1.0}, {21.0, 23.0}, {15.0, 18.0}}; }

Theta expert_theta() { return {0.0, 1.0, 21.5, 16.0}; }

std::string controller_name(ControllerType c) {
  switch (c) {
    case ControllerType::Baseline: return "baseline";
    case ControllerType::QP: return "qp";
    case ControllerType::MIQP: return "miqp";
    case ControllerType::Mask: return "mask";
  }
  return "?";
}

ControllerType parse_controller(const std::string& name) {
  for (auto c : {ControllerType::Baseline, ControllerType::QP, ControllerType::MIQP, ControllerType::Mask}) {
    if (name == controller_name(c)) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "controller must be baseline, qp, miqp or mask: " + name);
}

ConfigParams ExperimentSpec::default_config_params() {
  ConfigParams p;
  p.domain = theta_domain();
  p.max_iters = 50;
  p.n_init = 8;
  return p;
}

WeatherSeries month_weather(const ExperimentSpec& spec) {
  const MonthInfo& mi = info(spec.month);
  const TimeGrid grid = TimeGrid::days(month_start(spec.month), mi.days);
  if (spec.weather.file) return load_weather(*spec.weather.file, grid);
  return synth_weather(spec.weather.mean_temp.value_or(mi.mean_temp), spec.weather.daily_amp, spec.weather.noise_std,
                       spec.weather.solar_peak.value_or(mi.solar_peak), spec.weather.seed * 16 + mi.number, grid);
}

ArxModel identify_arx(const ExperimentSpec& spec, const WeatherSeries& weather) {
  PrbsConfig prbs = spec.prbs;
  prbs.seed = spec.prbs.seed * 1000003ULL + spec.weather.seed * 16 + month_number(spec.month);
  const IdentificationData data = collect_prbs_data(spec.plant, spec.hp, weather, spec.schedule, prbs,
                                                    spec.arx_noise_std, prbs.seed ^ 0x9e3779b97f4a7c15ULL, spec.init);
  return fit_arx(data.y, data.u_arx, spec.arx_na, spec.arx_nb, spec.arx_td);
}

std::string ArxCache::key(const ExperimentSpec& spec) {
  std::string s = month_name(spec.month);
  const auto& p = spec.plant;
  const auto& hp = spec.hp;
  for (double v : {p.c_air, p.c_mass, p.r_out, p.r_mass, p.solar_gain, p.q_internal_occupied, hp.q_nominal, hp.phi,
                   hp.gamma, hp.cop, spec.schedule.weekday_occupied_before, spec.schedule.weekday_occupied_after,
                   spec.init.t_in, spec.init.t_mass, spec.prbs.low, spec.prbs.high, spec.arx_noise_std,
                   spec.weather.daily_amp, spec.weather.noise_std, spec.weather.mean_temp.value_or(NAN),
                   spec.weather.solar_peak.value_or(NAN)}) {
    s += "|" + num(v);
  }
  s += "|" + std::to_string(spec.schedule.weekend_occupied) + "|" + std::to_string(spec.prbs.hold_steps) + "|" +
       std::to_string(spec.prbs.seed) + "|" + std::to_string(spec.weather.seed) + "|" +
       (spec.weather.file ? spec.weather.file->string() : std::string("synth")) + "|" + std::to_string(spec.arx_na) +
       "," + std::to_string(spec.arx_nb) + "," + std::to_string(spec.arx_td);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(s)));
  return month_name(spec.month) + "_" + hex;
}

ArxModel ArxCache::get(const ExperimentSpec& spec, const WeatherSeries& weather) {
  const std::string k = key(spec);
  std::lock_guard lock(mutex_);
  if (auto it = models_.find(k); it != models_.end()) return it->second;
  const std::filesystem::path file = spec.arx_cache_dir.empty() ? std::filesystem::path()
                                                                : spec.arx_cache_dir / ("arx_" + k + ".json");
  ArxModel model;
  if (!file.empty() && std::filesystem::exists(file)) {
    model = load_arx(file);
  } else {
    model = identify_arx(spec, weather);
    if (!file.empty()) {
      std::filesystem::create_directories(spec.arx_cache_dir);
      save_arx(file, model);
    }
  }
  models_.emplace(k, model);
  return model;
}

ArxCache& global_arx_cache() {
  static ArxCache cache;
  return cache;
}

Scenario prepare_scenario(const ExperimentSpec& spec, ArxCache& cache) {
  Scenario sc;
  sc.spec = spec;
  sc.month = month_number(spec.month);
  sc.contract = find_contract(spec.contracts, spec.contract_code);
  sc.month_weather = month_weather(spec);
  const int per_day = sc.month_weather.grid.steps_per_day();
  const int total_days = days_in_month(spec.month);
  if (spec.start_day < 1 || spec.start_day > total_days) throw Error(ErrorCode::InvalidArgument, "start_day outside month");
  const int days = spec.days == 0 ? total_days - spec.start_day + 1 : spec.days;
  if (days < 1 || spec.start_day - 1 + days > total_days) throw Error(ErrorCode::InvalidArgument, "window exceeds month");
  int steps = days * per_day;
  if (spec.max_steps > 0) steps = std::min(steps, spec.max_steps);
  sc.weather = slice(sc.month_weather, (spec.start_day - 1) * per_day, steps);
  sc.arx = cache.get(spec, sc.month_weather);
  return sc;
}

EvalOutput simulate(const Scenario& sc, ControllerType controller, const Theta& theta) {
  const ExperimentSpec& spec = sc.spec;
  EvalOutput out;
  ControlPolicy policy;
  auto log = std::make_shared<std::vector<MpcStepLog>>();
  if (controller == ControllerType::Baseline) {
    policy = rule_based_policy();
  } else {
    theta.validate();
    const EnergyPrices prices = sc.contract.prices_for(sc.month);
    auto price_at = [prices](Timestamp ts) {
      if (prices.single) return *prices.single;
      return classify_period(ts) == TariffPeriod::Day ? *prices.day : *prices.night;
    };
    const ControllerKind kind = controller == ControllerType::QP     ? ControllerKind::QP
                                : controller == ControllerType::MIQP ? ControllerKind::MIQP
                                                                     : ControllerKind::Mask;
    MpcPolicyOptions opts;
    opts.miqp_node_limit = spec.miqp_node_limit;
    policy = mpc_policy(kind, sc.arx, mpc_config(spec, theta), spec.hp, price_at, spec.schedule, log, opts);
  }
  try {
    out.trace = run_closed_loop(spec.plant, spec.hp, policy, sc.weather, spec.schedule, spec.init);
  } catch (const Error& e) {
    throw Error(e.code(), month_name(spec.month) + "/" + spec.contract_code + "/" + controller_name(controller) + ": " +
                              e.detail());
  }
  out.bill = compute_bill(out.trace, sc.contract, sc.month);
  out.comfort = pmv_cdf_80(out.trace, spec.comfort);
  out.j = out.bill.total();
  out.g = out.comfort.g_value;
  out.mpc_log = std::move(*log);
  return out;
}

EvalOutput evaluate_theta(const Theta& theta, const Scenario& sc) { return simulate(sc, ControllerType::Mask, theta); }

TuneOutput tune_contract(const Scenario& sc, const std::optional<std::filesystem::path>& log_path) {
  ConfigParams params = sc.spec.config_params;
  params.domain = theta_domain();
  params.seed = sc.spec.seed;

  RunOptions opts;
  std::ofstream log_file;
  if (log_path) {
    if (std::filesystem::exists(*log_path)) opts.resume = read_run_log(*log_path);
    if (log_path->has_parent_path()) std::filesystem::create_directories(log_path->parent_path());
    log_file.open(*log_path, std::ios::app);
    if (!log_file) throw Error(ErrorCode::IoError, "cannot write " + log_path->string());
  }
  TuneOutput out;
  opts.on_record = [&](const EvalRecord& r) {
    if (log_file.is_open()) log_file << record_to_json(r) << '\n' << std::flush;
  };
  const Blackbox blackbox = [&](const std::vector<double>& theta) {
    const EvalOutput e = evaluate_theta(Theta::from_vector(theta), sc);
    return BlackboxValue{e.j, e.g};
  };
  out.result = run_config(blackbox, params, opts);
  for (const auto& r : out.result.history) out.run_log += record_to_json(r) + "\n";
  return out;
}

std::int64_t pico_to_cents(std::int64_t pico) {
  constexpr std::int64_t unit = kPicoPerEuro / 100;
  return pico >= 0 ? (pico + unit / 2) / unit : -((-pico + unit / 2) / unit);
}

ContractReport build_report(const std::vector<CellOutcome>& cells, std::uint64_t seed,
                            const std::vector<std::string>& codes, const std::vector<Month>& months) {
  ContractReport rep;
  rep.seed = seed;
  rep.contracts = codes;
  for (Month m : months) rep.months.push_back(month_name(m));
  const bool with_total = months.size() > 1;
  if (with_total) rep.months.push_back("total");
  const std::size_t cols = rep.months.size();
  rep.cents.assign(codes.size(), std::vector<std::optional<std::int64_t>>(cols));

  for (const auto& c : cells) {
    if (c.seed != seed || !c.ok || !c.best_bill) continue;
    const auto ci = std::find(codes.begin(), codes.end(), c.contract) - codes.begin();
    const auto mi = std::find(months.begin(), months.end(), c.month) - months.begin();
    if (ci < static_cast<long>(codes.size()) && mi < static_cast<long>(months.size())) {
      rep.cents[ci][mi] = pico_to_cents(c.best_bill->total_pico);
    }
  }
  if (with_total) {
    for (auto& row : rep.cents) {
      std::int64_t sum = 0;
      bool complete = true;
      for (std::size_t m = 0; m < months.size(); ++m) {
        if (row[m]) sum += *row[m];
        else complete = false;
      }
      if (complete) row[cols - 1] = sum;
    }
  }
  rep.best_cents.assign(cols, std::nullopt);
  rep.worst_cents.assign(cols, std::nullopt);
  rep.sp_cents.assign(cols, std::nullopt);
  rep.saving_ratio.assign(cols, std::nullopt);
  for (std::size_t m = 0; m < cols; ++m) {
    for (const auto& row : rep.cents) {
      if (!row[m]) continue;
      if (!rep.best_cents[m] || *row[m] < *rep.best_cents[m]) rep.best_cents[m] = row[m];
      if (!rep.worst_cents[m] || *row[m] > *rep.worst_cents[m]) rep.worst_cents[m] = row[m];
    }
    if (rep.best_cents[m]) {
      rep.sp_cents[m] = *rep.worst_cents[m] - *rep.best_cents[m];
      if (*rep.worst_cents[m] > 0) rep.saving_ratio[m] = double(*rep.sp_cents[m]) / double(*rep.worst_cents[m]);
    }
  }
  if (cols > 0 && rep.best_cents[cols - 1]) {
    for (std::size_t c = 0; c < codes.size(); ++c) {
      if (rep.cents[c][cols - 1] == rep.best_cents[cols - 1]) {
        rep.best_contract = codes[c];
        break;
      }
    }
  }
  return rep;
}

ComparisonResult compare_contracts(const ExperimentSpec& base, const std::vector<Month>& months,
                                   const std::vector<std::string>& codes, const std::vector<std::uint64_t>& seeds) {
  if (months.empty() || codes.empty() || seeds.empty()) {
    throw Error(ErrorCode::InvalidArgument, "compare needs at least one month, contract and seed");
  }
  // Identify each month once before the pool starts.
  for (Month m : months) {
    ExperimentSpec s = base;
    s.month = m;
    global_arx_cache().get(s, month_weather(s));
  }

  ComparisonResult result;
  for (auto seed : seeds) {
    for (Month m : months) {
      for (const auto& code : codes) {
        CellOutcome c;
        c.contract = code;
        c.month = m;
        c.seed = seed;
        result.cells.push_back(std::move(c));
      }
    }
  }
  parallel_for(static_cast<int>(result.cells.size()), [&](int i) {
    CellOutcome& cell = result.cells[i];
    try {
      ExperimentSpec s = base;
      s.month = cell.month;
      s.contract_code = cell.contract;
      s.seed = cell.seed;
      const Scenario sc = prepare_scenario(s);
      TuneOutput t = tune_contract(sc);
      cell.tuning = std::move(t.result);
      cell.run_log = std::move(t.run_log);
      if (cell.tuning.best_feasible) {
        const Theta best = Theta::from_vector(cell.tuning.best_feasible->theta);
        const EvalOutput e = evaluate_theta(best, sc);
        cell.best_theta = best;
        cell.best_bill = e.bill;
        cell.best_comfort = e.comfort;
        cell.ok = true;
        if (e.g > 0.0) {
          cell.ok = false;
          cell.error = "re-evaluation of the best theta is infeasible";
        }
      } else {
        cell.error = cell.tuning.infeasibility_declared ? "infeasibility declared" : "no feasible evaluation";
      }
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  for (auto seed : seeds) result.reports.push_back(build_report(result.cells, seed, codes, months));
  return result;
}

std::vector<BaselineEntry> run_baselines(const Scenario& sc) {
  std::vector<BaselineEntry> out;
  for (auto c : {ControllerType::Baseline, ControllerType::QP, ControllerType::MIQP}) {
    const EvalOutput e = simulate(sc, c, expert_theta());
    BaselineEntry b;
    b.controller = c;
    b.bill = e.bill;
    b.comfort = e.comfort;
    if (!e.mpc_log.empty()) {
      double total = 0.0;
      for (const auto& r : e.mpc_log) total += r.solve_ms;
      b.mean_solve_ms = total / e.mpc_log.size();
    }
    b.max_u = e.trace.u.empty() ? 0.0 : *std::max_element(e.trace.u.begin(), e.trace.u.end());
    b.trace = e.trace;
    out.push_back(std::move(b));
  }
  return out;
}

namespace {

template <typename T>
std::optional<T> get(const toml::table& t, const char* key) {
  const toml::node* n = t.get(key);
  if (!n) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n->value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, std::int64_t>) {
    if (n->is_integer()) return *n->value<std::int64_t>();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (n->is_boolean()) return *n->value<bool>();
  } else {
    if (n->is_string()) return *n->value<std::string>();
  }
  throw Error(ErrorCode::SchemaError, std::string("wrong type for key ") + key);
}

void set(const toml::table& t, const char* key, double& dst) {
  if (auto v = get<double>(t, key)) dst = *v;
}
void set(const toml::table& t, const char* key, int& dst) {
  if (auto v = get<std::int64_t>(t, key)) dst = static_cast<int>(*v);
}

const toml::table* section(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw Error(ErrorCode::SchemaError, std::string("[") + name + "] must be a table");
  return n->as_table();
}

template <typename F>
void each_string(const toml::table& t, const char* key, F&& f) {
  const toml::node* n = t.get(key);
  if (!n) return;
  const auto* arr = n->as_array();
  if (!arr) throw Error(ErrorCode::SchemaError, std::string(key) + " must be an array");
  for (const auto& e : *arr) {
    if (!e.is_string()) throw Error(ErrorCode::SchemaError, std::string(key) + " entries must be strings");
    f(*e.value<std::string>());
  }
}

}  // namespace

ExperimentConfig load_experiment_text(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("TOML parse error: ") + std::string(e.description()));
  }
  ExperimentConfig cfg;
  ExperimentSpec& s = cfg.base;

  if (root.get("contract")) {
    std::ostringstream only;
    toml::table sub;
    sub.insert("contract", *root.get("contract"));
    only << sub;
    s.contracts = load_contracts_text(only.str());
  }
  if (const auto* e = section(root, "experiment")) {
    if (e->get("months")) {
      cfg.months.clear();
      each_string(*e, "months", [&](const std::string& m) { cfg.months.push_back(parse_month(m)); });
    }
    each_string(*e, "contracts", [&](const std::string& c) { cfg.contracts.push_back(c); });
    if (const toml::node* n = e->get("seeds")) {
      const auto* arr = n->as_array();
      if (!arr) throw Error(ErrorCode::SchemaError, "seeds must be an array");
      cfg.seeds.clear();
      for (const auto& v : *arr) {
        if (!v.is_integer() || *v.value<std::int64_t>() < 0) throw Error(ErrorCode::SchemaError, "seeds must be non-negative integers");
        cfg.seeds.push_back(static_cast<std::uint64_t>(*v.value<std::int64_t>()));
      }
    }
    if (auto c = get<std::string>(*e, "controller")) s.controller = parse_controller(*c);
    if (auto c = get<std::string>(*e, "contract")) s.contract_code = *c;
    if (auto m = get<std::string>(*e, "month")) s.month = parse_month(*m);
    set(*e, "start_day", s.start_day);
    set(*e, "days", s.days);
    set(*e, "max_steps", s.max_steps);
    set(*e, "miqp_node_limit", s.miqp_node_limit);
    if (auto dir = get<std::string>(*e, "arx_cache_dir")) s.arx_cache_dir = *dir;
  }
  if (const auto* b = section(root, "budget")) {
    set(*b, "max_iters", s.config_params.max_iters);
    set(*b, "n_init", s.config_params.n_init);
    set(*b, "beta_sqrt", s.config_params.beta_sqrt_const);
    set(*b, "lengthscale", s.config_params.lengthscale);
    set(*b, "noise_var", s.config_params.noise_var);
    set(*b, "n_candidates", s.config_params.n_candidates);
    set(*b, "n_local", s.config_params.n_local);
    if (auto sched = get<std::string>(*b, "beta_schedule")) {
      if (*sched == "constant") s.config_params.beta_schedule = BetaSchedule::Constant;
      else if (*sched == "log") s.config_params.beta_schedule = BetaSchedule::LogGrowth;
      else throw Error(ErrorCode::SchemaError, "beta_schedule must be constant or log");
    }
    if (auto k = get<std::string>(*b, "kernel")) {
      if (*k == "matern52") s.config_params.kernel = KernelKind::Matern52;
      else if (*k == "se") s.config_params.kernel = KernelKind::SquaredExponential;
      else throw Error(ErrorCode::SchemaError, "kernel must be matern52 or se");
    }
    if (auto ls = get<bool>(*b, "lengthscale_search")) s.config_params.lengthscale_search = *ls;
  }
  if (const auto* p = section(root, "plant")) {
    set(*p, "c_air", s.plant.c_air);
    set(*p, "c_mass", s.plant.c_mass);
    set(*p, "r_out", s.plant.r_out);
    set(*p, "r_mass", s.plant.r_mass);
    set(*p, "solar_gain", s.plant.solar_gain);
    set(*p, "q_internal_occupied", s.plant.q_internal_occupied);
    set(*p, "t_in0", s.init.t_in);
    set(*p, "t_mass0", s.init.t_mass);
  }
  if (const auto* h = section(root, "heat_pump")) {
    set(*h, "q_nominal", s.hp.q_nominal);
    set(*h, "phi", s.hp.phi);
    set(*h, "gamma", s.hp.gamma);
    set(*h, "cop", s.hp.cop);
  }
  if (const auto* m = section(root, "mpc")) {
    set(*m, "horizon", s.mpc.horizon);
    set(*m, "r", s.mpc.r_coeff);
    set(*m, "s", s.mpc.s_coeff);
    set(*m, "t_ub_occ", s.mpc.t_ub_occ);
    set(*m, "t_ub_unocc", s.mpc.t_ub_unocc);
  }
  if (const auto* w = section(root, "weather")) {
    if (auto f = get<std::string>(*w, "file")) s.weather.file = *f;
    if (auto v = get<double>(*w, "mean_temp")) s.weather.mean_temp = *v;
    if (auto v = get<double>(*w, "solar_peak")) s.weather.solar_peak = *v;
    set(*w, "daily_amp", s.weather.daily_amp);
    set(*w, "noise_std", s.weather.noise_std);
    if (auto v = get<std::int64_t>(*w, "seed")) s.weather.seed = static_cast<std::uint64_t>(*v);
  }
  if (cfg.contracts.empty()) {
    for (const auto& c : s.contracts) cfg.contracts.push_back(c.code);
  }
  s.plant.validate();
  s.hp.validate();
  s.mpc.validate();
  s.config_params.domain = theta_domain();
  s.config_params.validate();
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_experiment_text(buf.str());
}

}  // namespace hptune
