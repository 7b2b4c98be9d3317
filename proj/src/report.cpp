#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "graphfolio/backtest.hpp"
#include "graphfolio/errors.hpp"
#include "graphfolio/text.hpp"

namespace graphfolio {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string date_or_empty(Date d) { return d == 0 ? "" : format_date(d); }

Date date_from_field(const std::string& s) {
  return s.empty() ? 0 : parse_date(s);
}

ordered_json config_to_json(const BacktestConfig& c) {
  ordered_json j;
  j["lookback_T"] = c.lookback_T;
  j["vol_lookback"] = c.vol_lookback;
  j["min_overlap"] = c.min_overlap;
  j["min_history"] = c.min_history;
  j["use_tmfg"] = c.use_tmfg;
  j["gat"] = {{"heads", c.gat.K},
              {"head_width", c.gat.Tprime},
              {"hidden_width", c.gat.d1},
              {"dropout", c.gat.dropout},
              {"l1", c.gat.l1},
              {"leaky_slope", c.gat.leaky_slope}};
  j["train"] = {{"lr", c.train.lr},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"eps", c.train.eps},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience}};
  j["lambda_risk"] = c.lambda_risk;
  j["seed"] = c.seed;
  j["warm_start"] = c.warm_start;
  j["threads"] = c.n_threads;
  j["start"] = date_or_empty(c.start);
  j["end"] = date_or_empty(c.end);
  return j;
}

BacktestConfig config_from_json(const ordered_json& j) {
  BacktestConfig c;
  c.lookback_T = j.at("lookback_T").get<int>();
  c.vol_lookback = j.at("vol_lookback").get<int>();
  c.min_overlap = j.at("min_overlap").get<int>();
  c.min_history = j.at("min_history").get<int>();
  c.use_tmfg = j.at("use_tmfg").get<bool>();
  const auto& g = j.at("gat");
  c.gat.K = g.at("heads").get<int>();
  c.gat.Tprime = g.at("head_width").get<int>();
  c.gat.d1 = g.at("hidden_width").get<int>();
  c.gat.dropout = g.at("dropout").get<double>();
  c.gat.l1 = g.at("l1").get<double>();
  c.gat.leaky_slope = g.at("leaky_slope").get<double>();
  const auto& t = j.at("train");
  c.train.lr = t.at("lr").get<double>();
  c.train.beta1 = t.at("beta1").get<double>();
  c.train.beta2 = t.at("beta2").get<double>();
  c.train.eps = t.at("eps").get<double>();
  c.train.max_epochs = t.at("max_epochs").get<int>();
  c.train.patience = t.at("patience").get<int>();
  c.lambda_risk = j.at("lambda_risk").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.warm_start = j.at("warm_start").get<bool>();
  c.n_threads = j.at("threads").get<int>();
  c.start = date_from_field(j.at("start").get<std::string>());
  c.end = date_from_field(j.at("end").get<std::string>());
  return c;
}

}  // namespace

std::string report_to_json(const BacktestReport& report) {
  ordered_json j;
  j["schema"] = "graphfolio-report-v1";
  j["config"] = config_to_json(report.config);
  j["strategies"] = report.strategies;

  j["splits"] = ordered_json::array();
  for (const auto& s : report.splits) {
    ordered_json row;
    row["rebalance"] = format_date(s.rebalance);
    row["n_firms"] = s.n_firms;
    row["train_days"] = s.train_days;
    row["val_days"] = s.val_days;
    row["test_days"] = s.test_days;
    row["gat"] = {{"trained", s.gat.trained},
                  {"warm_started", s.gat.warm_started},
                  {"epochs_run", s.gat.epochs_run},
                  {"best_epoch", s.gat.best_epoch},
                  {"best_val_loss", s.gat.best_val_loss},
                  {"surrogate_epochs", s.gat.surrogate_epochs}};
    j["splits"].push_back(std::move(row));
  }

  j["rows"] = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json row;
    row["rebalance"] = format_date(r.rebalance);
    row["strategy"] = r.strategy;
    row["sharpe_train"] = r.sharpe_train;
    row["sharpe_val"] = r.sharpe_val;
    row["sharpe_test"] = r.sharpe_test;
    row["degenerate_train"] = r.degenerate_train;
    row["degenerate_val"] = r.degenerate_val;
    row["degenerate_test"] = r.degenerate_test;
    row["unallocated_fraction"] = r.unallocated;
    row["weighted_degree"] = r.weighted_degree;
    row["weighted_betweenness"] = r.weighted_betweenness;
    ordered_json sectors = ordered_json::object();
    for (const auto& [sector, weight] : r.sectors) sectors[sector] = weight;
    row["sectors"] = std::move(sectors);
    row["has_turnover"] = r.has_turnover;
    row["new_positions"] = r.turnover.new_positions;
    row["closed_positions"] = r.turnover.closed_positions;
    row["excess_new"] = r.turnover.excess_new;
    row["excess_closed"] = r.turnover.excess_closed;
    row["new_pct"] = r.turnover.new_pct;
    row["closed_pct"] = r.turnover.closed_pct;
    row["turnover_pct"] = r.turnover.turnover_pct;
    row["fallback_equal"] = r.fallback_equal;
    row["guarded"] = r.guarded;
    j["rows"].push_back(std::move(row));
  }

  j["aggregates"] = ordered_json::array();
  for (const auto& a : report.aggregates) {
    ordered_json row;
    row["strategy"] = a.strategy;
    row["quarters"] = a.quarters;
    row["mean_sharpe_train"] = a.mean_sharpe_train;
    row["mean_sharpe_val"] = a.mean_sharpe_val;
    row["mean_sharpe_test"] = a.mean_sharpe_test;
    row["degenerate_quarters"] = a.degenerate_quarters;
    row["sharpe_ma4"] = a.sharpe_ma4;
    row["turnover_quarters"] = a.turnover_quarters;
    row["mean_excess_turnover"] = a.mean_excess_turnover;
    j["aggregates"].push_back(std::move(row));
  }

  j["skips"] = ordered_json::array();
  for (const auto& s : report.skips) {
    j["skips"].push_back(
        {{"rebalance", format_date(s.rebalance)}, {"reason", s.reason}});
  }

  return j.dump(2) + "\n";
}

BacktestReport report_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("invalid report JSON: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != "graphfolio-report-v1") {
      throw DataError("unrecognized report schema '" +
                      j.at("schema").get<std::string>() + "'");
    }
    BacktestReport rep;
    rep.config = config_from_json(j.at("config"));
    rep.strategies = j.at("strategies").get<std::vector<std::string>>();
    for (const auto& row : j.at("splits")) {
      SplitRecord s;
      s.rebalance = parse_date(row.at("rebalance").get<std::string>());
      s.n_firms = row.at("n_firms").get<int>();
      s.train_days = row.at("train_days").get<int>();
      s.val_days = row.at("val_days").get<int>();
      s.test_days = row.at("test_days").get<int>();
      const auto& g = row.at("gat");
      s.gat.trained = g.at("trained").get<bool>();
      s.gat.warm_started = g.at("warm_started").get<bool>();
      s.gat.epochs_run = g.at("epochs_run").get<int>();
      s.gat.best_epoch = g.at("best_epoch").get<int>();
      s.gat.best_val_loss = g.at("best_val_loss").get<double>();
      s.gat.surrogate_epochs = g.at("surrogate_epochs").get<int>();
      rep.splits.push_back(std::move(s));
    }
    for (const auto& row : j.at("rows")) {
      StrategyQuarter r;
      r.rebalance = parse_date(row.at("rebalance").get<std::string>());
      r.strategy = row.at("strategy").get<std::string>();
      r.sharpe_train = row.at("sharpe_train").get<double>();
      r.sharpe_val = row.at("sharpe_val").get<double>();
      r.sharpe_test = row.at("sharpe_test").get<double>();
      r.degenerate_train = row.at("degenerate_train").get<bool>();
      r.degenerate_val = row.at("degenerate_val").get<bool>();
      r.degenerate_test = row.at("degenerate_test").get<bool>();
      r.unallocated = row.at("unallocated_fraction").get<double>();
      r.weighted_degree = row.at("weighted_degree").get<double>();
      r.weighted_betweenness = row.at("weighted_betweenness").get<double>();
      for (auto it = row.at("sectors").begin(); it != row.at("sectors").end();
           ++it) {
        r.sectors[it.key()] = it.value().get<double>();
      }
      r.has_turnover = row.at("has_turnover").get<bool>();
      r.turnover.new_positions = row.at("new_positions").get<int>();
      r.turnover.closed_positions = row.at("closed_positions").get<int>();
      r.turnover.excess_new = row.at("excess_new").get<int>();
      r.turnover.excess_closed = row.at("excess_closed").get<int>();
      r.turnover.new_pct = row.at("new_pct").get<double>();
      r.turnover.closed_pct = row.at("closed_pct").get<double>();
      r.turnover.turnover_pct = row.at("turnover_pct").get<double>();
      r.fallback_equal = row.at("fallback_equal").get<bool>();
      r.guarded = row.at("guarded").get<bool>();
      rep.rows.push_back(std::move(r));
    }
    for (const auto& row : j.at("aggregates")) {
      StrategyAggregate a;
      a.strategy = row.at("strategy").get<std::string>();
      a.quarters = row.at("quarters").get<int>();
      a.mean_sharpe_train = row.at("mean_sharpe_train").get<double>();
      a.mean_sharpe_val = row.at("mean_sharpe_val").get<double>();
      a.mean_sharpe_test = row.at("mean_sharpe_test").get<double>();
      a.degenerate_quarters = row.at("degenerate_quarters").get<int>();
      a.sharpe_ma4 = row.at("sharpe_ma4").get<std::vector<double>>();
      a.turnover_quarters = row.at("turnover_quarters").get<int>();
      a.mean_excess_turnover = row.at("mean_excess_turnover").get<double>();
      rep.aggregates.push_back(std::move(a));
    }
    for (const auto& row : j.at("skips")) {
      SkipRecord s;
      s.rebalance = parse_date(row.at("rebalance").get<std::string>());
      s.reason = row.at("reason").get<std::string>();
      rep.skips.push_back(std::move(s));
    }
    return rep;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
}

void write_report_json(const BacktestReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report '" + path + "'");
  out << report_to_json(report);
  if (!out) throw DataError("failed writing report '" + path + "'");
}

BacktestReport load_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

void write_figure_csvs(const BacktestReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write figure file '" + path + "'");
    return out;
  };

  std::unordered_map<std::string, const StrategyAggregate*> agg_by_name;
  for (const auto& a : report.aggregates) agg_by_name[a.strategy] = &a;

  {
    std::ofstream out = open("sharpe_over_time.csv");
    out << "rebalance,strategy,sharpe_test,sharpe_ma4\n";
    std::unordered_map<std::string, size_t> seen;
    for (const auto& r : report.rows) {
      size_t k = seen[r.strategy]++;
      out << format_date(r.rebalance) << ',' << r.strategy << ','
          << shortest_double(r.sharpe_test) << ',';
      auto it = agg_by_name.find(r.strategy);
      if (k >= 3 && it != agg_by_name.end() &&
          k - 3 < it->second->sharpe_ma4.size()) {
        out << shortest_double(it->second->sharpe_ma4[k - 3]);
      }
      out << '\n';
    }
  }
  {
    std::ofstream out = open("centrality.csv");
    out << "rebalance,strategy,weighted_degree,weighted_betweenness\n";
    for (const auto& r : report.rows) {
      out << format_date(r.rebalance) << ',' << r.strategy << ','
          << shortest_double(r.weighted_degree) << ','
          << shortest_double(r.weighted_betweenness) << '\n';
    }
  }
  {
    std::ofstream out = open("sectors.csv");
    out << "rebalance,strategy,sector,weight\n";
    for (const auto& r : report.rows) {
      for (const auto& [sector, weight] : r.sectors) {
        out << format_date(r.rebalance) << ',' << r.strategy << ',' << sector
            << ',' << shortest_double(weight) << '\n';
      }
    }
  }
  {
    std::ofstream out = open("turnover.csv");
    out << "rebalance,strategy,new_positions,closed_positions,new_pct,"
           "closed_pct,turnover_pct\n";
    for (const auto& r : report.rows) {
      out << format_date(r.rebalance) << ',' << r.strategy << ','
          << r.turnover.new_positions << ',' << r.turnover.closed_positions
          << ',' << shortest_double(r.turnover.new_pct) << ','
          << shortest_double(r.turnover.closed_pct) << ','
          << shortest_double(r.turnover.turnover_pct) << '\n';
    }
  }
  {
    std::ofstream out = open("sparsity.csv");
    out << "rebalance,strategy,unallocated_fraction\n";
    for (const auto& r : report.rows) {
      out << format_date(r.rebalance) << ',' << r.strategy << ','
          << shortest_double(r.unallocated) << '\n';
    }
  }
}

}  // namespace graphfolio
