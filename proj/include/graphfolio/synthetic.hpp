#pragma once

#include <cstdint>

#include "graphfolio/market_data.hpp"

namespace graphfolio {

// Sector factor model: r = drift + market + sector + idiosyncratic, all
// shocks scaled by a two-state volatility regime. Hazards are annual
// probabilities converted to per-trading-day rates.
struct GeneratorConfig {
  int n_firms = 100;        // initial listing count
  double n_years = 5.0;     // 252 trading days per year
  int n_sectors = 5;
  double default_hazard = 0.015;  // annual P(default) per firm
  double exit_hazard = 0.0;       // annual P(non-default delisting)
  double entry_rate = 0.0;        // expected new listings per year
  double daily_drift = 4e-4;
  double market_vol = 0.008;
  double sector_vol = 0.006;
  double idio_vol = 0.012;
  double regime_high_mult = 2.5;  // vol multiplier in the stressed state
  double p_enter_high = 0.02;     // per-day regime transition probabilities
  double p_exit_high = 0.05;
  double price_min = 20.0;
  double price_max = 200.0;
  Date start_date = 16436;  // 2015-01-01

  void validate() const;
};

PricePanel generate_synthetic_market(const GeneratorConfig& config, uint64_t seed);

// Defaults observed per firm-year of listing; used by the generate summary.
double realized_default_rate(const PricePanel& panel);

}  // namespace graphfolio
