#include "hptune/billing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <toml.hpp>

#include "hptune/error.hpp"

namespace hptune {

namespace {

constexpr int kWindowSeconds = 900;

constexpr std::array<const char*, 12> kMonthKeys = {"jan", "feb", "mar", "apr", "may", "jun",
                                                     "jul", "aug", "sep", "oct", "nov", "dec"};

/// Energy of one step in mWh.
std::int64_t step_mwh(double p_kw, int step_seconds) { return std::llround(p_kw * step_seconds * 1000.0 / 3.6); }

/// Price per kWh in micro-euro.
std::int64_t micro(double value) { return std::llround(value * 1e6); }

std::int64_t window_index(Timestamp ts) {
  const auto s = ts.time_since_epoch().count();
  return s >= 0 ? s / kWindowSeconds : -((-s + kWindowSeconds - 1) / kWindowSeconds);
}

void check_grid(const TimeGrid& grid) {
  if (grid.step_seconds > kWindowSeconds || kWindowSeconds % grid.step_seconds != 0) {
    throw Error(ErrorCode::GridMismatch, "grid step must divide 900 s");
  }
}

/// Peak in mW from per-step mWh; the window mean power is window energy / 0.25 h.
std::int64_t peak_mw(const TimeGrid& grid, const std::vector<std::int64_t>& mwh) {
  std::int64_t best = 0;
  std::int64_t current = 0;
  std::int64_t current_window = 0;
  for (int i = 0; i < grid.n_steps; ++i) {
    const std::int64_t w = window_index(grid.at(i));
    if (i == 0 || w != current_window) {
      current_window = w;
      current = 0;
    }
    current += mwh[i];
    best = std::max(best, current);
  }
  return 4 * best;
}

void check_price(const std::optional<double>& v, const std::string& code) {
  if (v && !(*v >= 0.0 && std::isfinite(*v))) throw Error(ErrorCode::SchemaError, code + ": negative or non-finite price");
}

void check_prices(const EnergyPrices& p, const std::string& code) {
  const bool single = p.single.has_value();
  const bool day = p.day.has_value();
  const bool night = p.night.has_value();
  if (single == (day || night) || day != night) {
    throw Error(ErrorCode::SchemaError, code + ": need exactly one of single_price or day_price + night_price");
  }
  check_price(p.single, code);
  check_price(p.day, code);
  check_price(p.night, code);
}

Contract make(const std::string& code, std::optional<double> single, std::optional<double> day,
              std::optional<double> night, double cap, double fixed) {
  Contract c;
  c.code = code;
  c.prices = {single, day, night};
  c.capacity_tariff = cap;
  c.fixed_charge = fixed;
  c.dynamic = code.front() == 'd';
  return c;
}

EnergyPrices shifted(const EnergyPrices& p, double offset) {
  EnergyPrices out = p;
  for (auto* v : {&out.single, &out.day, &out.night}) {
    if (*v) **v = std::round((**v + offset) * 1e6) / 1e6;
  }
  return out;
}

std::optional<double> number(const toml::node* node, const std::string& what) {
  if (!node) return std::nullopt;
  if (auto v = node->value<double>()) return *v;
  throw Error(ErrorCode::SchemaError, what + " must be a number");
}

EnergyPrices parse_month_entry(const toml::node& node, const Contract& c, const std::string& key) {
  const std::string what = c.code + ".monthly." + key;
  if (node.is_number()) {
    if (c.day_night()) throw Error(ErrorCode::SchemaError, what + ": day/night contract needs {day, night}");
    return {*node.value<double>(), std::nullopt, std::nullopt};
  }
  const auto* tbl = node.as_table();
  if (!tbl) throw Error(ErrorCode::SchemaError, what + " must be a number or table");
  EnergyPrices p;
  for (auto&& [k, v] : *tbl) {
    const std::string name(k.str());
    if (name == "single") p.single = number(&v, what + ".single");
    else if (name == "day") p.day = number(&v, what + ".day");
    else if (name == "night") p.night = number(&v, what + ".night");
    else throw Error(ErrorCode::SchemaError, what + ": unknown key " + name);
  }
  check_prices(p, what);
  return p;
}

}  // namespace

TariffPeriod classify_period(Timestamp ts) {
  const unsigned wd = iso_weekday(ts);
  const double h = hour_of_day(ts);
  return (wd <= 5 && h >= 7.0 && h < 22.0) ? TariffPeriod::Day : TariffPeriod::Night;
}

void Contract::validate() const {
  if (code.empty()) throw Error(ErrorCode::SchemaError, "contract code is empty");
  check_prices(prices, code);
  if (!(capacity_tariff >= 0.0) || !(fixed_charge >= 0.0)) {
    throw Error(ErrorCode::SchemaError, code + ": negative capacity tariff or fixed charge");
  }
  if (base_month < 1 || base_month > 12) throw Error(ErrorCode::SchemaError, code + ": base_month outside 1..12");
  for (const auto& [m, p] : monthly) {
    if (m < 1 || m > 12) throw Error(ErrorCode::SchemaError, code + ": monthly key outside 1..12");
    check_prices(p, code + "." + month_key(m));
    if (p.single.has_value() != prices.single.has_value()) {
      throw Error(ErrorCode::SchemaError, code + "." + month_key(m) + ": override structure differs from contract");
    }
  }
}

EnergyPrices Contract::prices_for(unsigned month) const {
  if (auto it = monthly.find(month); it != monthly.end()) return it->second;
  if (dynamic && month != base_month) {
    throw Error(ErrorCode::MissingMonthPrice, code + ": no price for month " + month_key(month));
  }
  return prices;
}

std::string format_euro(std::int64_t pico, int decimals) {
  if (decimals < 0 || decimals > 12) throw Error(ErrorCode::InvalidArgument, "decimals outside 0..12");
  std::int64_t unit = 1;
  for (int i = 0; i < 12 - decimals; ++i) unit *= 10;
  const bool neg = pico < 0;
  const std::uint64_t mag = neg ? static_cast<std::uint64_t>(-(pico + 1)) + 1 : static_cast<std::uint64_t>(pico);
  const std::uint64_t scaled = (mag + static_cast<std::uint64_t>(unit) / 2) / static_cast<std::uint64_t>(unit);
  std::uint64_t denom = 1;
  for (int i = 0; i < decimals; ++i) denom *= 10;
  std::string out = (neg && scaled != 0 ? "-" : "") + std::to_string(scaled / denom);
  if (decimals > 0) {
    std::string frac = std::to_string(scaled % denom);
    out += "." + std::string(decimals - frac.size(), '0') + frac;
  }
  return out;
}

double peak_power_15min(const TimeGrid& grid, const std::vector<double>& p_elec) {
  check_grid(grid);
  if (static_cast<int>(p_elec.size()) != grid.n_steps) throw Error(ErrorCode::GridMismatch, "series length != grid");
  std::vector<std::int64_t> mwh(p_elec.size());
  for (std::size_t i = 0; i < p_elec.size(); ++i) mwh[i] = step_mwh(p_elec[i], grid.step_seconds);
  return peak_mw(grid, mwh) / 1e6;
}

BillBreakdown compute_bill(const SimTrace& trace, const Contract& contract, unsigned month) {
  contract.validate();
  check_grid(trace.grid);
  if (static_cast<int>(trace.p_elec.size()) != trace.grid.n_steps) {
    throw Error(ErrorCode::GridMismatch, "p_elec length != grid");
  }
  if (calendar_month(trace.grid.start) != month || calendar_month(trace.grid.last()) != month) {
    throw Error(ErrorCode::SpanMismatch, "trace is not inside month " + month_key(month));
  }
  const EnergyPrices prices = contract.prices_for(month);

  std::vector<std::int64_t> mwh(trace.p_elec.size());
  std::int64_t day_mwh = 0;
  std::int64_t night_mwh = 0;
  for (int i = 0; i < trace.grid.n_steps; ++i) {
    if (!(trace.p_elec[i] >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative power in trace");
    mwh[i] = step_mwh(trace.p_elec[i], trace.grid.step_seconds);
    (classify_period(trace.grid.at(i)) == TariffPeriod::Day ? day_mwh : night_mwh) += mwh[i];
  }

  BillBreakdown b;
  // mWh x micro-euro/kWh = pico-euro.
  if (prices.single) {
    b.energy_pico = (day_mwh + night_mwh) * micro(*prices.single);
  } else {
    b.energy_pico = day_mwh * micro(*prices.day) + night_mwh * micro(*prices.night);
  }
  const std::int64_t peak = peak_mw(trace.grid, mwh);
  b.capacity_pico = peak * micro(contract.capacity_tariff);
  b.fixed_pico = micro(contract.fixed_charge) * 1'000'000;
  b.total_pico = b.energy_pico + b.capacity_pico + b.fixed_pico;
  b.peak_kw = peak / 1e6;
  b.day_kwh = day_mwh / 1e6;
  b.night_kwh = night_mwh / 1e6;
  return b;
}

std::vector<Contract> default_contracts() {
  using std::nullopt;
  std::vector<Contract> cs = {
      make("ddd", nullopt, 0.307, 0.270, 3.35, 11.2), make("dds", 0.297, nullopt, nullopt, 3.35, 11.2),
      make("dnd", nullopt, 0.329, 0.292, 0.0, 19.6),  make("dns", 0.319, nullopt, nullopt, 0.0, 19.6),
      make("sdd", nullopt, 0.278, 0.253, 3.35, 11.2), make("sds", 0.270, nullopt, nullopt, 3.35, 11.2),
      make("snd", nullopt, 0.300, 0.275, 0.0, 19.6),  make("sns", 0.392, nullopt, nullopt, 0.0, 19.6),
      make("sdd1", nullopt, 0.307, 0.270, 3.35, 11.2), make("sds1", 0.297, nullopt, nullopt, 3.35, 11.2),
      make("snd1", nullopt, 0.329, 0.292, 0.0, 19.6), make("sns1", 0.319, nullopt, nullopt, 0.0, 19.6),
  };
  // Synthetic month-to-month movement of the dynamic tariffs (€/kWh offset from November).
  const std::array<std::pair<unsigned, double>, 3> offsets = {{{12, 0.015}, {1, 0.025}, {2, -0.010}}};
  for (auto& c : cs) {
    if (!c.dynamic) continue;
    for (const auto& [m, off] : offsets) c.monthly[m] = shifted(c.prices, off);
  }
  return cs;
}

std::vector<Contract> load_contracts_text(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("TOML parse error: ") + std::string(e.description()));
  }
  std::vector<Contract> contracts = default_contracts();
  const toml::node* list_node = root.get("contract");
  if (!list_node) return contracts;
  const auto* list = list_node->as_array();
  if (!list) throw Error(ErrorCode::SchemaError, "`contract` must be an array of tables");

  std::set<std::string> seen;
  for (const auto& entry : *list) {
    const auto* tbl = entry.as_table();
    if (!tbl) throw Error(ErrorCode::SchemaError, "contract entry must be a table");
    const auto code = tbl->get("code") ? tbl->get("code")->value<std::string>() : std::nullopt;
    if (!code || code->empty()) throw Error(ErrorCode::SchemaError, "contract entry without code");
    if (!seen.insert(*code).second) throw Error(ErrorCode::DuplicateCode, "contract code repeated: " + *code);

    auto it = std::find_if(contracts.begin(), contracts.end(), [&](const Contract& c) { return c.code == *code; });
    const bool existing = it != contracts.end();
    Contract c = existing ? *it : Contract{};
    if (!existing) {
      c.code = *code;
      c.dynamic = code->front() == 'd';
    }
    for (auto&& [k, v] : *tbl) {
      const std::string key(k.str());
      const std::string what = *code + "." + key;
      if (key == "code" || key == "monthly") continue;
      if (key == "single_price") c.prices.single = number(&v, what);
      else if (key == "day_price") c.prices.day = number(&v, what);
      else if (key == "night_price") c.prices.night = number(&v, what);
      else if (key == "capacity_tariff") c.capacity_tariff = *number(&v, what);
      else if (key == "fixed_charge") c.fixed_charge = *number(&v, what);
      else if (key == "dynamic") {
        if (!v.is_boolean()) throw Error(ErrorCode::SchemaError, what + " must be a boolean");
        c.dynamic = *v.value<bool>();
      } else if (key == "base_month") {
        const auto m = v.value<std::string>();
        if (!m || month_from_key(*m) == 0) throw Error(ErrorCode::SchemaError, what + " must be a month key");
        c.base_month = month_from_key(*m);
      } else {
        throw Error(ErrorCode::SchemaError, what + ": unknown key");
      }
    }
    check_prices(c.prices, *code);
    if (const auto* monthly_node = tbl->get("monthly")) {
      const auto* monthly = monthly_node->as_table();
      if (!monthly) throw Error(ErrorCode::SchemaError, *code + ".monthly must be a table");
      for (auto&& [k, v] : *monthly) {
        const std::string key(k.str());
        const unsigned m = month_from_key(key);
        if (m == 0) throw Error(ErrorCode::SchemaError, *code + ".monthly: unknown month " + key);
        c.monthly[m] = parse_month_entry(v, c, key);
      }
    }
    c.validate();
    if (existing) *it = std::move(c);
    else contracts.push_back(std::move(c));
  }
  return contracts;
}

std::vector<Contract> load_contracts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_contracts_text(buf.str());
}

const Contract& find_contract(const std::vector<Contract>& contracts, const std::string& code) {
  for (const auto& c : contracts) {
    if (c.code == code) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown contract " + code);
}

unsigned month_from_key(const std::string& key) {
  for (unsigned i = 0; i < kMonthKeys.size(); ++i) {
    if (key == kMonthKeys[i]) return i + 1;
  }
  return 0;
}

std::string month_key(unsigned month) {
  if (month < 1 || month > 12) return "?";
  return kMonthKeys[month - 1];
}

std::string bill_csv(const std::vector<BillRow>& rows) {
  std::string out = "contract,month,energy_eur,capacity_eur,fixed_eur,total_eur,peak_kw\n";
  char peak[32];
  for (const auto& r : rows) {
    std::snprintf(peak, sizeof peak, "%.6f", r.bill.peak_kw);
    out += r.contract + "," + r.month + "," + format_euro(r.bill.energy_pico) + "," +
           format_euro(r.bill.capacity_pico) + "," + format_euro(r.bill.fixed_pico) + "," +
           format_euro(r.bill.total_pico) + "," + peak + "\n";
  }
  return out;
}

}  // namespace hptune
