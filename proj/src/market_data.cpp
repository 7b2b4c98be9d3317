#include "graphfolio/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "graphfolio/errors.hpp"
#include "graphfolio/text.hpp"

namespace graphfolio {

int Panel::calendar_pos(Date d) const {
  auto it = std::lower_bound(calendar.begin(), calendar.end(), d);
  if (it == calendar.end() || *it != d) return -1;
  return int(it - calendar.begin());
}

void Panel::rebuild_index() {
  firm_index.clear();
  firm_index.reserve(firms.size());
  for (size_t i = 0; i < firms.size(); ++i) firm_index[firms[i]] = int(i);
}

namespace {

constexpr const char* kHeader = "date,firm_id,close,sector,default_flag";

struct RawRow {
  Date date;
  double close;
  std::string sector;
  bool default_flag;
  long line;
};

}  // namespace

PricePanel parse_price_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw DataError(origin + ": expected header '" + std::string(kHeader) +
                    "', got '" + line + "'");
  }

  std::map<std::string, std::vector<RawRow>> rows_by_firm;
  std::set<Date> all_dates;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_view(line, ',');
    auto fail = [&](const std::string& why) {
      throw DataError(origin + ": line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 5) fail("expected 5 fields, got " + std::to_string(fields.size()));

    RawRow row;
    row.line = line_no;
    try {
      row.date = parse_date(std::string(fields[0]));
    } catch (const DataError& e) {
      fail(e.what());
    }
    std::string firm(fields[1]);
    if (firm.empty()) fail("empty firm_id");
    if (!parse_double(fields[2], row.close)) fail("unparseable close '" + std::string(fields[2]) + "'");
    if (!(row.close > 0.0) || !std::isfinite(row.close)) {
      fail("close must be a positive number, got '" + std::string(fields[2]) + "'");
    }
    row.sector = std::string(fields[3]);
    if (fields[4] == "0") {
      row.default_flag = false;
    } else if (fields[4] == "1") {
      row.default_flag = true;
    } else {
      fail("default_flag must be 0 or 1, got '" + std::string(fields[4]) + "'");
    }
    all_dates.insert(row.date);
    rows_by_firm[firm].push_back(row);
  }
  if (rows_by_firm.empty()) throw DataError(origin + ": no data rows");

  PricePanel panel;
  panel.calendar.assign(all_dates.begin(), all_dates.end());
  for (auto& [firm, rows] : rows_by_firm) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RawRow& a, const RawRow& b) { return a.date < b.date; });
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].date == rows[i - 1].date) {
        throw DataError(origin + ": line " + std::to_string(rows[i].line) +
                        ": duplicate observation for firm " + firm + " on " +
                        format_date(rows[i].date));
      }
      if (rows[i].sector != rows[i - 1].sector) {
        throw DataError(origin + ": line " + std::to_string(rows[i].line) +
                        ": firm " + firm + " changes sector mid-panel");
      }
      if (rows[i - 1].default_flag) {
        throw DataError(origin + ": line " + std::to_string(rows[i].line) +
                        ": firm " + firm + " has rows after its default marker");
      }
    }

    FirmMeta meta;
    meta.sector = rows.front().sector;
    size_t n_obs = rows.size();
    if (rows.back().default_flag) {
      meta.default_date = rows.back().date;
      --n_obs;
      if (n_obs == 0) {
        throw DataError(origin + ": line " + std::to_string(rows.back().line) +
                        ": firm " + firm + " has a default marker but no prior observation");
      }
    }

    Series series;
    series.start = panel.calendar_pos(rows.front().date);
    series.values.reserve(n_obs);
    for (size_t i = 0; i < n_obs; ++i) {
      int pos = panel.calendar_pos(rows[i].date);
      if (pos != series.start + int(i)) {
        throw DataError(origin + ": line " + std::to_string(rows[i].line) +
                        ": firm " + firm + " skips trading day " +
                        format_date(panel.calendar[size_t(series.start) + i]));
      }
      series.values.push_back(rows[i].close);
    }
    if (meta.default_date) {
      int marker_pos = panel.calendar_pos(*meta.default_date);
      if (marker_pos != series.start + int(n_obs)) {
        throw DataError(origin + ": line " + std::to_string(rows.back().line) +
                        ": firm " + firm +
                        " default marker is not on the trading day after its last close");
      }
    }

    panel.firms.push_back(firm);
    panel.meta.push_back(std::move(meta));
    panel.series.push_back(std::move(series));
  }
  panel.rebuild_index();
  return panel;
}

PricePanel load_price_panel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open price file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_price_csv(buf.str(), path);
}

std::string price_panel_to_csv(const PricePanel& panel) {
  std::string out(kHeader);
  out += '\n';
  for (size_t pos = 0; pos < panel.calendar.size(); ++pos) {
    std::string date = format_date(panel.calendar[pos]);
    for (size_t f = 0; f < panel.firms.size(); ++f) {
      const Series& s = panel.series[f];
      const FirmMeta& meta = panel.meta[f];
      bool marker = meta.default_date && panel.calendar[pos] == *meta.default_date;
      if (!marker && !s.covers(int(pos))) continue;
      // The marker row repeats the final close; it is a tombstone, not a price.
      double close = marker ? s.values.back() : s.at(int(pos));
      out += date;
      out += ',';
      out += panel.firms[f];
      out += ',';
      out += shortest_double(close);
      out += ',';
      out += meta.sector;
      out += marker ? ",1\n" : ",0\n";
    }
  }
  return out;
}

void write_price_panel(const PricePanel& panel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write price file '" + path + "'");
  out << price_panel_to_csv(panel);
}

ReturnPanel compute_returns(const PricePanel& panel) {
  ReturnPanel out;
  out.calendar = panel.calendar;
  out.firms = panel.firms;
  out.meta = panel.meta;
  out.series.resize(panel.series.size());
  for (size_t f = 0; f < panel.series.size(); ++f) {
    const Series& closes = panel.series[f];
    Series& ret = out.series[f];
    ret.start = closes.start + 1;
    size_t n = closes.values.size();
    ret.values.reserve(n);
    for (size_t i = 1; i < n; ++i) {
      ret.values.push_back(closes.values[i] / closes.values[i - 1] - 1.0);
    }
    if (out.meta[f].default_date) ret.values.push_back(-1.0);
  }
  out.rebuild_index();
  return out;
}

VolPanel compute_volatility_series(const ReturnPanel& returns, int lookback) {
  if (lookback < 2) throw ConfigError("volatility lookback must be >= 2");
  VolPanel out;
  out.calendar = returns.calendar;
  out.firms = returns.firms;
  out.meta = returns.meta;
  out.lookback = lookback;
  out.series.resize(returns.series.size());
  size_t L = size_t(lookback);
  for (size_t f = 0; f < returns.series.size(); ++f) {
    const Series& r = returns.series[f];
    Series& v = out.series[f];
    v.start = r.start + lookback - 1;
    if (r.values.size() < L) continue;
    v.values.reserve(r.values.size() - L + 1);
    for (size_t last = L - 1; last < r.values.size(); ++last) {
      double mean = 0.0;
      for (size_t i = last + 1 - L; i <= last; ++i) mean += r.values[i];
      mean /= double(L);
      double ss = 0.0;
      for (size_t i = last + 1 - L; i <= last; ++i) {
        double d = r.values[i] - mean;
        ss += d * d;
      }
      v.values.push_back(std::sqrt(ss / double(L)));
    }
  }
  out.rebuild_index();
  return out;
}

UniverseSnapshot active_universe(const ReturnPanel& returns, Date as_of,
                                 int lookback_T, int min_history) {
  if (lookback_T < 1) throw ConfigError("lookback_T must be >= 1");
  int pos = returns.calendar_pos(as_of);
  if (pos < 0) throw DataError("as_of " + format_date(as_of) + " is not a trading day");

  int window_begin = pos - lookback_T;  // window is [window_begin, pos)
  UniverseSnapshot snap;
  snap.as_of = as_of;
  snap.lookback_T = lookback_T;

  for (size_t f = 0; f < returns.firms.size(); ++f) {
    const FirmMeta& meta = returns.meta[f];
    if (meta.default_date && *meta.default_date < as_of) continue;
    const Series& r = returns.series[f];
    // Must still be trading: a return on the last day before as_of.
    if (!r.covers(pos - 1)) continue;
    int lo = std::max(r.start, std::max(window_begin, 0));
    int hi = std::min(r.end(), pos);
    if (hi - lo < min_history) continue;
    snap.firms.push_back(returns.firms[f]);
    snap.panel_rows.push_back(int(f));
  }
  if (snap.firms.empty()) {
    throw DataError("empty universe at " + format_date(as_of));
  }

  snap.features.setZero(long(snap.firms.size()), lookback_T);
  for (size_t u = 0; u < snap.firms.size(); ++u) {
    const Series& r = returns.series[size_t(snap.panel_rows[u])];
    for (int j = 0; j < lookback_T; ++j) {
      int p = pos - 1 - j;
      if (p < 0) break;
      if (r.covers(p)) snap.features(long(u), j) = r.at(p);
    }
  }
  return snap;
}

}  // namespace graphfolio
