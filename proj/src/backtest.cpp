#include "graphfolio/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "graphfolio/dependency.hpp"
#include "graphfolio/errors.hpp"
#include "graphfolio/rng.hpp"
#include "graphfolio/threading.hpp"

namespace graphfolio {

std::vector<RollingSplit> rolling_splits(const std::vector<Date>& calendar,
                                         Date start, Date end,
                                         int lookback_T) {
  if (lookback_T < 1) throw ConfigError("lookback_T must be positive");
  if (calendar.empty()) throw DataError("empty trading calendar");
  Date lo = start == 0 ? calendar.front() : start;
  Date hi = end == 0 ? calendar.back() : end;
  if (lo > hi) throw ConfigError("backtest start date is after the end date");

  int n = int(calendar.size());
  std::vector<RollingSplit> out;
  for (int pos = 0; pos < n; ++pos) {
    if (pos > 0 && quarter_index(calendar[pos]) ==
                       quarter_index(calendar[pos - 1])) {
      continue;  // not the quarter's first trading day
    }
    if (calendar[pos] < lo || calendar[pos] > hi) continue;
    int qi = quarter_index(calendar[pos]);
    int qend = pos;
    while (qend < n && quarter_index(calendar[qend]) == qi) ++qend;
    int q = qend - pos;
    if (q < 2) continue;  // tail quarter too short to score
    if (pos < std::max(lookback_T, 3 * q)) continue;  // not enough history

    RollingSplit s;
    s.rebalance_date = calendar[pos];
    s.rebalance_pos = pos;
    s.train_begin = pos - 3 * q;
    s.train_end = pos - q;
    s.val_begin = pos - q;
    s.val_end = pos;
    s.test_begin = pos;
    s.test_end = qend;
    s.lookback_T = lookback_T;
    out.push_back(s);
  }
  if (out.empty()) {
    throw DataError(
        "insufficient history: no calendar quarter has both " +
        std::to_string(lookback_T) +
        " prior trading days and a scoreable quarter after it");
  }
  return out;
}

SharpeResult portfolio_sharpe(const PortfolioWeights& w,
                              const Eigen::MatrixXd& window_returns) {
  if (window_returns.rows() != w.weights.size()) {
    throw PipelineError("return matrix rows (" +
                        std::to_string(window_returns.rows()) +
                        ") do not match the weight vector (" +
                        std::to_string(w.weights.size()) + ")");
  }
  if (window_returns.cols() < 2) {
    throw DataError("Sharpe window needs at least 2 days");
  }
  Eigen::VectorXd r_p = window_returns.transpose() * w.weights;
  SharpeResult out;
  out.mean_daily = r_p.mean();
  out.std_daily = std::sqrt((r_p.array() - out.mean_daily).square().mean());
  if (out.std_daily == 0.0) {
    out.degenerate = true;
    return out;
  }
  out.sharpe = std::sqrt(252.0) * out.mean_daily / out.std_daily;
  return out;
}

TurnoverResult excess_turnover(const PortfolioWeights& current,
                               const PortfolioWeights& previous,
                               const std::vector<std::string>& entered,
                               const std::vector<std::string>& exited) {
  if (size_t(current.weights.size()) != current.firms.size() ||
      size_t(previous.weights.size()) != previous.firms.size()) {
    throw PipelineError("weight vector does not match firm list");
  }
  std::unordered_set<std::string> held_prev;
  for (size_t i = 0; i < previous.firms.size(); ++i) {
    if (previous.weights(long(i)) > 0.0) held_prev.insert(previous.firms[i]);
  }
  std::unordered_set<std::string> held_now;
  for (size_t i = 0; i < current.firms.size(); ++i) {
    if (current.weights(long(i)) > 0.0) held_now.insert(current.firms[i]);
  }
  std::unordered_set<std::string> entered_set(entered.begin(), entered.end());
  std::unordered_set<std::string> exited_set(exited.begin(), exited.end());

  TurnoverResult out;
  for (size_t i = 0; i < current.firms.size(); ++i) {
    const std::string& f = current.firms[i];
    if (current.weights(long(i)) > 0.0 && !held_prev.count(f)) {
      ++out.new_positions;
      if (!entered_set.count(f)) ++out.excess_new;
    }
  }
  for (size_t i = 0; i < previous.firms.size(); ++i) {
    const std::string& f = previous.firms[i];
    if (previous.weights(long(i)) > 0.0 && !held_now.count(f)) {
      ++out.closed_positions;
      if (!exited_set.count(f)) ++out.excess_closed;
    }
  }
  if (!held_now.empty()) {
    out.new_pct = 100.0 * double(out.excess_new) / double(held_now.size());
  }
  if (!held_prev.empty()) {
    out.closed_pct =
        100.0 * double(out.excess_closed) / double(held_prev.size());
  }
  out.turnover_pct = out.new_pct + out.closed_pct;
  return out;
}

TurnoverResult excess_turnover(const PortfolioWeights& current,
                               const PortfolioWeights& previous) {
  std::vector<std::string> entered, exited;
  std::set_difference(current.firms.begin(), current.firms.end(),
                      previous.firms.begin(), previous.firms.end(),
                      std::back_inserter(entered));
  std::set_difference(previous.firms.begin(), previous.firms.end(),
                      current.firms.begin(), current.firms.end(),
                      std::back_inserter(exited));
  return excess_turnover(current, previous, entered, exited);
}

WeightedCentrality weighted_centrality(const PortfolioWeights& w,
                                       const CentralityScores& scores) {
  if (scores.degree.size() != w.weights.size() ||
      scores.betweenness.size() != w.weights.size()) {
    throw PipelineError("centrality scores do not match the weight vector");
  }
  WeightedCentrality out;
  out.degree = w.weights.dot(scores.degree);
  out.betweenness = w.weights.dot(scores.betweenness);
  return out;
}

std::map<std::string, double> sector_allocation(const PortfolioWeights& w,
                                                const Panel& panel) {
  if (size_t(w.weights.size()) != w.firms.size()) {
    throw PipelineError("weight vector does not match firm list");
  }
  std::map<std::string, double> out;
  for (size_t i = 0; i < w.firms.size(); ++i) {
    auto it = panel.firm_index.find(w.firms[i]);
    std::string sector =
        it == panel.firm_index.end() ? "" : panel.meta[size_t(it->second)].sector;
    if (sector.empty()) sector = "UNKNOWN";
    out[sector] += w.weights(long(i));
  }
  return out;
}

double unallocated_fraction(const PortfolioWeights& w) {
  long n = w.weights.size();
  if (n == 0) throw DataError("empty weight vector");
  long zeros = 0;
  for (long i = 0; i < n; ++i) {
    if (w.weights(i) == 0.0) ++zeros;
  }
  return double(zeros) / double(n);
}

namespace {

Eigen::MatrixXd window_return_matrix(const ReturnPanel& returns,
                                     const UniverseSnapshot& snap, int begin,
                                     int end) {
  Eigen::MatrixXd R(long(snap.firms.size()), long(end - begin));
  for (size_t u = 0; u < snap.firms.size(); ++u) {
    const Series& s = returns.series[size_t(snap.panel_rows[u])];
    for (int pos = begin; pos < end; ++pos) {
      R(long(u), long(pos - begin)) = s.covers(pos) ? s.at(pos) : 0.0;
    }
  }
  return R;
}

}  // namespace

BacktestReport run_backtest(const PricePanel& panel,
                            const std::vector<StrategySpec>& strategies,
                            const BacktestConfig& config) {
  if (strategies.empty()) throw ConfigError("no strategies selected");
  for (const auto& spec : strategies) validate(spec);
  for (size_t i = 0; i < strategies.size(); ++i) {
    for (size_t j = i + 1; j < strategies.size(); ++j) {
      if (strategies[i].kind == strategies[j].kind) {
        throw ConfigError("strategy '" + strategy_name(strategies[i].kind) +
                          "' listed twice");
      }
    }
  }
  if (config.lookback_T < 2) throw ConfigError("lookback_T must be >= 2");
  if (config.min_history < 1) throw ConfigError("min_history must be >= 1");

  ReturnPanel returns = compute_returns(panel);
  VolPanel vols = compute_volatility_series(returns, config.vol_lookback);
  int threads = resolve_threads(config.n_threads);
  std::vector<RollingSplit> splits =
      rolling_splits(panel.calendar, config.start, config.end, config.lookback_T);

  BacktestReport rep;
  rep.config = config;
  for (const auto& spec : strategies) {
    rep.strategies.push_back(strategy_name(spec.kind));
  }

  bool want_training = false;
  GatParams fixed_gat;
  bool have_fixed_gat = false;
  for (const auto& spec : strategies) {
    if (spec.kind != StrategyKind::gat) continue;
    if (spec.checkpoint_path.empty()) {
      want_training = true;
    } else {
      fixed_gat = load_checkpoint(spec.checkpoint_path);
      have_fixed_gat = true;
      if (fixed_gat.T != config.lookback_T) {
        throw ConfigError("checkpoint was trained for lookback_T=" +
                          std::to_string(fixed_gat.T) + ", config has " +
                          std::to_string(config.lookback_T));
      }
    }
  }

  GatParams prev_params;
  bool have_prev_params = false;
  std::vector<PortfolioWeights> prev_weights(strategies.size());
  std::vector<bool> has_prev(strategies.size(), false);

  for (size_t si = 0; si < splits.size(); ++si) {
    const RollingSplit& sp = splits[si];
    try {
      UniverseSnapshot snap = active_universe(
          returns, sp.rebalance_date, config.lookback_T, config.min_history);
      size_t n = snap.firms.size();
      if (config.use_tmfg && n < 4) {
        throw DataError("universe has " + std::to_string(n) +
                        " firms; the planar filter needs at least 4");
      }
      if (n < 2) {
        throw DataError("universe has fewer than 2 firms");
      }

      DependencyMatrix dep =
          pairwise_dependency_matrix(vols, snap, config.min_overlap, threads);
      FilteredGraph g = config.use_tmfg ? tmfg(dep) : complete_graph(dep);
      CentralityScores scores = peripherality_scores(g, threads);

      Eigen::MatrixXd R_train =
          window_return_matrix(returns, snap, sp.train_begin, sp.train_end);
      Eigen::MatrixXd R_val =
          window_return_matrix(returns, snap, sp.val_begin, sp.val_end);
      Eigen::MatrixXd R_test =
          window_return_matrix(returns, snap, sp.test_begin, sp.test_end);

      SplitRecord srec;
      srec.rebalance = sp.rebalance_date;
      srec.n_firms = int(n);
      srec.train_days = sp.train_end - sp.train_begin;
      srec.val_days = sp.val_end - sp.val_begin;
      srec.test_days = sp.test_end - sp.test_begin;

      GatParams trained;
      bool have_trained = false;
      if (want_training) {
        bool warm = config.warm_start && have_prev_params;
        GatParams init =
            warm ? prev_params
                 : gat_init(config.gat, config.lookback_T,
                            mix_seed(config.seed, uint64_t(si) * 2));
        TrainConfig tc = config.train;
        tc.seed = mix_seed(config.seed, uint64_t(si) * 2 + 1);
        TrainResult tr = train_gat(init, snap.features, g, R_train, R_val, tc);
        trained = tr.params;
        have_trained = true;
        srec.gat.trained = true;
        srec.gat.warm_started = warm;
        srec.gat.epochs_run = tr.epochs_run;
        srec.gat.best_epoch = tr.best_epoch;
        srec.gat.best_val_loss = tr.best_val_loss;
        srec.gat.surrogate_epochs = tr.surrogate_epochs;
      }

      CovMatrix cov;
      bool have_cov = false;
      std::vector<StrategyQuarter> staged_rows;
      std::vector<PortfolioWeights> staged_weights(strategies.size());
      for (size_t k = 0; k < strategies.size(); ++k) {
        const StrategySpec& spec = strategies[k];
        PortfolioWeights w;
        switch (spec.kind) {
          case StrategyKind::equal:
            w = equal_weight(snap);
            break;
          case StrategyKind::network_index:
            w = network_index_weights(scores, snap);
            break;
          case StrategyKind::mean_variance:
            if (!have_cov) {
              cov = sample_covariance(returns, snap);
              have_cov = true;
            }
            w = mean_variance_weights(cov, spec.lambda_risk);
            break;
          case StrategyKind::gat:
            w = gat_weights(spec.checkpoint_path.empty() ? trained : fixed_gat,
                            snap, g);
            break;
        }

        StrategyQuarter row;
        row.rebalance = sp.rebalance_date;
        row.strategy = strategy_name(spec.kind);
        SharpeResult st = portfolio_sharpe(w, R_train);
        row.sharpe_train = st.sharpe;
        row.degenerate_train = st.degenerate;
        SharpeResult sv = portfolio_sharpe(w, R_val);
        row.sharpe_val = sv.sharpe;
        row.degenerate_val = sv.degenerate;
        SharpeResult ss = portfolio_sharpe(w, R_test);
        row.sharpe_test = ss.sharpe;
        row.degenerate_test = ss.degenerate;
        row.unallocated = unallocated_fraction(w);
        WeightedCentrality wc = weighted_centrality(w, scores);
        row.weighted_degree = wc.degree;
        row.weighted_betweenness = wc.betweenness;
        row.sectors = sector_allocation(w, panel);
        if (has_prev[k]) {
          row.has_turnover = true;
          row.turnover = excess_turnover(w, prev_weights[k]);
        }
        row.fallback_equal = w.fallback_equal;
        row.guarded = w.guarded;
        staged_rows.push_back(std::move(row));
        staged_weights[k] = std::move(w);
      }

      rep.splits.push_back(std::move(srec));
      for (auto& row : staged_rows) rep.rows.push_back(std::move(row));
      for (size_t k = 0; k < strategies.size(); ++k) {
        prev_weights[k] = std::move(staged_weights[k]);
        has_prev[k] = true;
      }
      if (have_trained) {
        prev_params = std::move(trained);
        have_prev_params = true;
      }
    } catch (const DataError& e) {
      rep.skips.push_back({sp.rebalance_date, e.what()});
    } catch (const PipelineError& e) {
      rep.skips.push_back({sp.rebalance_date, e.what()});
    }
  }

  if (rep.splits.empty()) {
    std::string reason =
        rep.skips.empty() ? "no splits" : rep.skips.front().reason;
    throw PipelineError("every rolling split failed; first reason: " + reason);
  }
  (void)have_fixed_gat;

  for (const std::string& name : rep.strategies) {
    StrategyAggregate agg;
    agg.strategy = name;
    std::vector<double> test_series;
    double sum_train = 0.0, sum_val = 0.0, sum_test = 0.0;
    int n_train = 0, n_val = 0, n_test = 0;
    double sum_turnover = 0.0;
    for (const auto& row : rep.rows) {
      if (row.strategy != name) continue;
      ++agg.quarters;
      test_series.push_back(row.sharpe_test);
      if (!row.degenerate_train) {
        sum_train += row.sharpe_train;
        ++n_train;
      }
      if (!row.degenerate_val) {
        sum_val += row.sharpe_val;
        ++n_val;
      }
      if (row.degenerate_test) {
        ++agg.degenerate_quarters;
      } else {
        sum_test += row.sharpe_test;
        ++n_test;
      }
      if (row.has_turnover) {
        sum_turnover += row.turnover.turnover_pct;
        ++agg.turnover_quarters;
      }
    }
    if (n_train > 0) agg.mean_sharpe_train = sum_train / n_train;
    if (n_val > 0) agg.mean_sharpe_val = sum_val / n_val;
    if (n_test > 0) agg.mean_sharpe_test = sum_test / n_test;
    if (agg.turnover_quarters > 0) {
      agg.mean_excess_turnover = sum_turnover / agg.turnover_quarters;
    }
    for (size_t i = 0; i + 4 <= test_series.size(); ++i) {
      agg.sharpe_ma4.push_back((test_series[i] + test_series[i + 1] +
                                test_series[i + 2] + test_series[i + 3]) /
                               4.0);
    }
    rep.aggregates.push_back(std::move(agg));
  }

  return rep;
}

}  // namespace graphfolio
