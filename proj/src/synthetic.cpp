#include "graphfolio/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "graphfolio/errors.hpp"
#include "graphfolio/rng.hpp"

namespace graphfolio {

void GeneratorConfig::validate() const {
  if (n_firms < 1) throw ConfigError("n_firms must be >= 1");
  if (!(n_years > 0.0)) throw ConfigError("n_years must be > 0");
  if (n_sectors < 1) throw ConfigError("n_sectors must be >= 1");
  if (default_hazard < 0.0 || default_hazard >= 1.0)
    throw ConfigError("default_hazard must be in [0, 1)");
  if (exit_hazard < 0.0 || exit_hazard >= 1.0)
    throw ConfigError("exit_hazard must be in [0, 1)");
  if (entry_rate < 0.0) throw ConfigError("entry_rate must be >= 0");
  if (market_vol < 0.0 || sector_vol < 0.0 || idio_vol < 0.0)
    throw ConfigError("volatilities must be >= 0");
  if (regime_high_mult <= 0.0) throw ConfigError("regime_high_mult must be > 0");
  if (p_enter_high < 0.0 || p_enter_high > 1.0 || p_exit_high < 0.0 || p_exit_high > 1.0)
    throw ConfigError("regime transition probabilities must be in [0, 1]");
  if (!(price_min > 0.0) || price_max < price_min)
    throw ConfigError("need 0 < price_min <= price_max");
}

namespace {

struct FirmState {
  std::string id;
  int sector;
  int first_day;
  double price;
  bool alive = true;
  bool defaulted = false;
  int last_day = -1;  // day of the last recorded close
};

std::string firm_id(int ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "F%06d", ordinal);
  return buf;
}

}  // namespace

PricePanel generate_synthetic_market(const GeneratorConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);

  int n_days = int(std::lround(config.n_years * 252.0));
  if (n_days < 2) throw ConfigError("n_years too small: fewer than 2 trading days");
  std::vector<Date> calendar = weekday_calendar(config.start_date, n_days);

  double daily_default = 1.0 - std::pow(1.0 - config.default_hazard, 1.0 / 252.0);
  double daily_exit = 1.0 - std::pow(1.0 - config.exit_hazard, 1.0 / 252.0);
  double daily_entries = config.entry_rate / 252.0;

  std::vector<FirmState> firms;
  firms.reserve(size_t(config.n_firms));
  auto list_firm = [&](int day) {
    FirmState s;
    s.id = firm_id(int(firms.size()) + 1);
    s.sector = int(firms.size()) % config.n_sectors;
    s.first_day = day;
    s.price = rng.uniform(config.price_min, config.price_max);
    s.last_day = day;
    firms.push_back(std::move(s));
  };
  for (int i = 0; i < config.n_firms; ++i) list_firm(0);

  // One closes row per (firm, day); filled day by day.
  std::vector<std::vector<double>> closes(firms.size());
  auto record = [&](size_t f, double price) {
    if (f >= closes.size()) closes.resize(f + 1);
    closes[f].push_back(price);
  };
  for (size_t f = 0; f < firms.size(); ++f) record(f, firms[f].price);

  bool regime_high = false;
  std::vector<double> sector_shock(static_cast<size_t>(config.n_sectors));
  std::vector<Date> default_dates(firms.size(), 0);

  for (int day = 1; day < n_days; ++day) {
    if (regime_high) {
      if (rng.uniform() < config.p_exit_high) regime_high = false;
    } else {
      if (rng.uniform() < config.p_enter_high) regime_high = true;
    }
    double mult = regime_high ? config.regime_high_mult : 1.0;

    int entries = daily_entries > 0.0 ? rng.poisson(daily_entries) : 0;
    for (int e = 0; e < entries; ++e) {
      list_firm(day);
      closes.resize(firms.size());
      default_dates.resize(firms.size(), 0);
      record(firms.size() - 1, firms.back().price);
    }

    double market = rng.normal() * config.market_vol * mult;
    for (int j = 0; j < config.n_sectors; ++j) {
      sector_shock[size_t(j)] = rng.normal() * config.sector_vol * mult;
    }

    for (size_t f = 0; f < firms.size(); ++f) {
      FirmState& s = firms[f];
      if (!s.alive || s.first_day == day) continue;
      if (daily_default > 0.0 && rng.uniform() < daily_default) {
        s.alive = false;
        s.defaulted = true;
        default_dates[f] = calendar[size_t(day)];
        continue;
      }
      if (daily_exit > 0.0 && rng.uniform() < daily_exit) {
        s.alive = false;
        continue;
      }
      double shock = config.daily_drift + market + sector_shock[size_t(s.sector)] +
                     rng.normal() * config.idio_vol * mult;
      s.price *= std::exp(shock);
      record(f, s.price);
      s.last_day = day;
    }
  }

  PricePanel panel;
  panel.calendar = calendar;
  // Generated ids are already in lexicographic order.
  for (size_t f = 0; f < firms.size(); ++f) {
    const FirmState& s = firms[f];
    panel.firms.push_back(s.id);
    FirmMeta meta;
    meta.sector = "S" + std::to_string(s.sector);
    if (s.defaulted) meta.default_date = default_dates[f];
    panel.meta.push_back(std::move(meta));
    Series series;
    series.start = s.first_day;
    series.values = closes[f];
    panel.series.push_back(std::move(series));
  }
  panel.rebuild_index();
  return panel;
}

double realized_default_rate(const PricePanel& panel) {
  double firm_years = 0.0;
  long defaults = 0;
  for (size_t f = 0; f < panel.firms.size(); ++f) {
    double days = double(panel.series[f].values.size());
    if (panel.meta[f].default_date) {
      ++defaults;
      days += 1.0;
    }
    firm_years += days / 252.0;
  }
  return firm_years > 0.0 ? double(defaults) / firm_years : 0.0;
}

}  // namespace graphfolio
