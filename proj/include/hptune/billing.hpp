#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hptune/core_model.hpp"

namespace hptune {

enum class TariffPeriod { Day, Night };

/// Day iff Monday-Friday and 7:00 <= time < 22:00.
TariffPeriod classify_period(Timestamp ts);

/// Energy prices for one month (€/kWh). Either `single` or both `day` and `night`.
struct EnergyPrices {
  std::optional<double> single;
  std::optional<double> day;
  std::optional<double> night;
};

struct Contract {
  std::string code;
  EnergyPrices prices;
  double capacity_tariff = 0.0;  // €/kW/month
  double fixed_charge = 0.0;     // €/month
  /// Dynamic contracts publish `prices` for `base_month` only; other months need an override.
  bool dynamic = false;
  unsigned base_month = 11;
  std::map<unsigned, EnergyPrices> monthly;  // calendar month -> override

  bool day_night() const { return prices.day.has_value(); }
  void validate() const;
  /// Prices in force for a calendar month; throws MissingMonthPrice.
  EnergyPrices prices_for(unsigned month) const;
};

/// Euro amounts are held as integer pico-euro so that sums are exact.
inline constexpr std::int64_t kPicoPerEuro = 1'000'000'000'000;

struct BillBreakdown {
  std::int64_t energy_pico = 0;
  std::int64_t capacity_pico = 0;
  std::int64_t fixed_pico = 0;
  std::int64_t total_pico = 0;
  double peak_kw = 0.0;
  double day_kwh = 0.0;
  double night_kwh = 0.0;

  double energy_cost() const { return energy_pico / double(kPicoPerEuro); }
  double capacity_cost() const { return capacity_pico / double(kPicoPerEuro); }
  double fixed_cost() const { return fixed_pico / double(kPicoPerEuro); }
  double total() const { return total_pico / double(kPicoPerEuro); }
};

/// Exact decimal rendering of a pico-euro amount with `decimals` digits (half away from zero).
std::string format_euro(std::int64_t pico, int decimals = 6);

/// Maximum mean power over calendar-aligned 15-minute windows [kW].
double peak_power_15min(const TimeGrid& grid, const std::vector<double>& p_elec);

/// `month` is the calendar month (1..12) every trace step must fall in.
BillBreakdown compute_bill(const SimTrace& trace, const Contract& contract, unsigned month);

/// The twelve Table-style contracts, with synthetic monthly overrides for the dynamic ones.
std::vector<Contract> default_contracts();

/// Defaults overridden/extended by a TOML file (`[[contract]]` tables).
std::vector<Contract> load_contracts(const std::filesystem::path& path);
std::vector<Contract> load_contracts_text(const std::string& toml_text);

const Contract& find_contract(const std::vector<Contract>& contracts, const std::string& code);

/// Three-letter month key (`jan` ... `dec`) to month number; 0 if unknown.
unsigned month_from_key(const std::string& key);
std::string month_key(unsigned month);

struct BillRow {
  std::string contract;
  std::string month;
  BillBreakdown bill;
};

/// `contract,month,energy_eur,capacity_eur,fixed_eur,total_eur,peak_kw`
std::string bill_csv(const std::vector<BillRow>& rows);

}  // namespace hptune
