#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphfolio/gatnet.hpp"
#include "graphfolio/market_data.hpp"
#include "graphfolio/netfilter.hpp"
#include "graphfolio/strategies.hpp"

namespace graphfolio {

// One rebalance: contiguous calendar-position ranges [begin, end) laid out as
// train (2q days), validation (q), test (q), where q is the trading-day count
// of the quarter starting at the rebalance date.
struct RollingSplit {
  Date rebalance_date = 0;
  int rebalance_pos = 0;
  int train_begin = 0, train_end = 0;
  int val_begin = 0, val_end = 0;
  int test_begin = 0, test_end = 0;
  int lookback_T = 0;
};

// One split per calendar quarter whose first trading day falls in
// [start, end] and has at least max(lookback_T, 3q) prior trading days.
// Throws when no quarter qualifies.
std::vector<RollingSplit> rolling_splits(const std::vector<Date>& calendar,
                                         Date start, Date end, int lookback_T);

struct SharpeResult {
  double sharpe = 0.0;      // annualized, sqrt(252) * mean/std of daily r_p
  double mean_daily = 0.0;
  double std_daily = 0.0;   // population
  bool degenerate = false;  // zero daily std; sharpe reported as 0
};

// window_returns is firms x days, aligned with w's firm order. A defaulted
// holding contributes its -1 terminal return on the default day and 0 after.
SharpeResult portfolio_sharpe(const PortfolioWeights& w,
                              const Eigen::MatrixXd& window_returns);

struct TurnoverResult {
  int new_positions = 0;     // held now, not held before
  int closed_positions = 0;  // held before, not held now
  int excess_new = 0;        // new positions not explained by universe entry
  int excess_closed = 0;     // closed positions not explained by universe exit
  double new_pct = 0.0;      // 100 * excess_new / current holdings
  double closed_pct = 0.0;   // 100 * excess_closed / previous holdings
  double turnover_pct = 0.0; // new_pct + closed_pct
};

// Positions are firms with weight > 0; entered/exited are the universe
// changes between the two snapshots (firms present only in the current /
// only in the previous weight vector's firm list).
TurnoverResult excess_turnover(const PortfolioWeights& current,
                               const PortfolioWeights& previous,
                               const std::vector<std::string>& entered,
                               const std::vector<std::string>& exited);
// Convenience overload deriving entry/exit from the two firm lists.
TurnoverResult excess_turnover(const PortfolioWeights& current,
                               const PortfolioWeights& previous);

struct WeightedCentrality {
  double degree = 0.0;
  double betweenness = 0.0;
};

WeightedCentrality weighted_centrality(const PortfolioWeights& w,
                                       const CentralityScores& scores);

// Groups weights by the firms' sectors; firms missing from the panel land in
// "UNKNOWN". Values sum to 1 whenever the weights do.
std::map<std::string, double> sector_allocation(const PortfolioWeights& w,
                                                const Panel& panel);

// Fraction of firms with exactly zero weight.
double unallocated_fraction(const PortfolioWeights& w);

struct BacktestConfig {
  int lookback_T = 756;   // feature/dependency window, trading days
  int vol_lookback = 30;
  int min_overlap = 60;
  int min_history = 60;
  bool use_tmfg = true;   // false keeps the complete dependency graph
  GatHyper gat;
  TrainConfig train;      // per-split seeds are derived from `seed` below
  double lambda_risk = 1.0;
  uint64_t seed = 1;
  bool warm_start = true; // reuse the previous split's trained parameters
  int n_threads = 0;      // 0 = GRAPHFOLIO_THREADS or hardware
  Date start = 0;         // 0 = first possible rebalance
  Date end = 0;           // 0 = last calendar date
};

struct GatSplitStats {
  bool trained = false;
  bool warm_started = false;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  int surrogate_epochs = 0;
};

struct SplitRecord {
  Date rebalance = 0;
  int n_firms = 0;
  int train_days = 0, val_days = 0, test_days = 0;
  GatSplitStats gat;
};

struct StrategyQuarter {
  Date rebalance = 0;
  std::string strategy;
  double sharpe_train = 0.0, sharpe_val = 0.0, sharpe_test = 0.0;
  bool degenerate_train = false, degenerate_val = false,
       degenerate_test = false;
  double unallocated = 0.0;
  double weighted_degree = 0.0, weighted_betweenness = 0.0;
  std::map<std::string, double> sectors;
  bool has_turnover = false;  // false on a strategy's first evaluated quarter
  TurnoverResult turnover;
  bool fallback_equal = false;
  bool guarded = false;
};

struct StrategyAggregate {
  std::string strategy;
  int quarters = 0;
  double mean_sharpe_train = 0.0, mean_sharpe_val = 0.0,
         mean_sharpe_test = 0.0;
  int degenerate_quarters = 0;    // quarters excluded from the test mean
  std::vector<double> sharpe_ma4; // 4-quarter moving average of test Sharpe
  int turnover_quarters = 0;      // quarters with a previous allocation
  double mean_excess_turnover = 0.0;
};

struct SkipRecord {
  Date rebalance = 0;
  std::string reason;
};

struct BacktestReport {
  BacktestConfig config;
  std::vector<std::string> strategies;
  std::vector<SplitRecord> splits;
  std::vector<StrategyQuarter> rows;  // split-major, strategy order preserved
  std::vector<StrategyAggregate> aggregates;
  std::vector<SkipRecord> skips;
};

// Full pipeline per split: universe snapshot, volatility-based dependency
// matrix, filtered graph, trained allocation network, then every strategy
// evaluated on the shared snapshot/graph/test quarter. A failing split is
// recorded under `skips` and the backtest moves on.
BacktestReport run_backtest(const PricePanel& panel,
                            const std::vector<StrategySpec>& strategies,
                            const BacktestConfig& config);

std::string report_to_json(const BacktestReport& report);
BacktestReport report_from_json(const std::string& text);
void write_report_json(const BacktestReport& report, const std::string& path);
BacktestReport load_report_json(const std::string& path);

// sharpe_over_time.csv, centrality.csv, sectors.csv, turnover.csv,
// sparsity.csv — flat plot-ready tables under `dir`.
void write_figure_csvs(const BacktestReport& report, const std::string& dir);

}  // namespace graphfolio
