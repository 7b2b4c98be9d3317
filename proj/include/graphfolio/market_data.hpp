#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "graphfolio/date.hpp"

namespace graphfolio {

struct FirmMeta {
  std::string sector;
  std::optional<Date> default_date;
};

// Per-firm values over a contiguous run of calendar positions:
// values[i] belongs to calendar[start + i].
struct Series {
  int start = 0;
  std::vector<double> values;

  int end() const { return start + int(values.size()); }
  bool covers(int pos) const { return pos >= start && pos < end(); }
  double at(int pos) const { return values[size_t(pos - start)]; }
};

// Shared layout of the price/return/volatility panels: a trading calendar,
// a sorted firm list defining row order, and one contiguous series per firm.
struct Panel {
  std::vector<Date> calendar;
  std::vector<std::string> firms;
  std::vector<FirmMeta> meta;      // parallel to firms
  std::vector<Series> series;      // parallel to firms
  std::unordered_map<std::string, int> firm_index;

  // Position of d in the calendar, -1 if d is not a trading day.
  int calendar_pos(Date d) const;
  void rebuild_index();
};

struct PricePanel : Panel {};
struct ReturnPanel : Panel {};
struct VolPanel : Panel {
  int lookback = 30;
};

struct UniverseSnapshot {
  Date as_of = 0;
  std::vector<std::string> firms;  // sorted, defines node indices
  std::vector<int> panel_rows;     // row of each firm in the source panel
  int lookback_T = 756;
  // Row u holds the return window of firm u in reversed chronology:
  // column 0 is the most recent return before as_of, missing history is 0.
  Eigen::MatrixXd features;
};

// CSV schema: date,firm_id,close,sector,default_flag. A default_flag=1 row is
// a terminal marker: it sets the firm's default date and must be the firm's
// last row on the trading day right after its final close; its close column
// is validated but not stored as an observation.
PricePanel load_price_panel(const std::string& path);
PricePanel parse_price_csv(const std::string& text, const std::string& origin);
void write_price_panel(const PricePanel& panel, const std::string& path);
std::string price_panel_to_csv(const PricePanel& panel);

// Simple daily returns close_t/close_{t-1} - 1 over consecutive trading days;
// a defaulting firm gets one terminal return of -1 on its default date.
ReturnPanel compute_returns(const PricePanel& panel);

// Population standard deviation over the trailing `lookback` returns.
VolPanel compute_volatility_series(const ReturnPanel& returns, int lookback = 30);

// Firms with at least min_history returns in the T trading days before as_of,
// no default before as_of, and a return on the last trading day before as_of.
UniverseSnapshot active_universe(const ReturnPanel& returns, Date as_of,
                                 int lookback_T, int min_history = 60);

}  // namespace graphfolio
