#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graphfolio/backtest.hpp"
#include "graphfolio/dependency.hpp"
#include "graphfolio/errors.hpp"
#include "graphfolio/market_data.hpp"
#include "graphfolio/netfilter.hpp"
#include "graphfolio/strategies.hpp"
#include "graphfolio/synthetic.hpp"
#include "graphfolio/text.hpp"
#include "graphfolio/threading.hpp"

namespace {

using namespace graphfolio;

// Dates typed on the command line are configuration, not data.
Date parse_cli_date(const std::string& text, const char* flag) {
  try {
    return parse_date(text);
  } catch (const DataError& e) {
    throw ConfigError(std::string(flag) + ": " + e.what());
  }
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * fraction);
  return buf;
}

void echo_config(CLI::App* sub, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto path = std::filesystem::path(out_dir) / "effective_config.txt";
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write config echo '" + path.string() + "'");
  }
  out << sub->config_to_str(true, true);
}

struct GenerateArgs {
  GeneratorConfig gc;
  std::string start = "2015-01-01";
  uint64_t seed = 1;
  std::string out = "prices.csv";
};

int cmd_generate(const GenerateArgs& a) {
  GeneratorConfig gc = a.gc;
  gc.start_date = parse_cli_date(a.start, "--start");
  PricePanel panel = generate_synthetic_market(gc, a.seed);
  write_price_panel(panel, a.out);
  std::cout << "wrote " << a.out << ": " << panel.firms.size() << " firms, "
            << panel.calendar.size() << " trading days ("
            << shortest_double(gc.n_years) << " years), realized default rate "
            << percent(realized_default_rate(panel)) << "/yr\n";
  return 0;
}

struct GraphArgs {
  std::string prices;
  std::string as_of;
  std::string out_dir = "graph_out";
  int lookback_T = 756;
  int vol_lookback = 30;
  int min_overlap = 60;
  int min_history = 60;
  bool no_tmfg = false;
  int threads = 0;
};

int cmd_graph(const GraphArgs& a, CLI::App* sub) {
  PricePanel panel = load_price_panel(a.prices);
  Date as_of =
      a.as_of.empty() ? panel.calendar.back() : parse_cli_date(a.as_of, "--as-of");
  ReturnPanel returns = compute_returns(panel);
  VolPanel vols = compute_volatility_series(returns, a.vol_lookback);
  UniverseSnapshot snap =
      active_universe(returns, as_of, a.lookback_T, a.min_history);
  if (snap.firms.size() < 4) {
    throw DataError("universe at " + format_date(as_of) + " has " +
                    std::to_string(snap.firms.size()) +
                    " firms; the graph pipeline needs at least 4");
  }
  int threads = resolve_threads(a.threads);
  DependencyMatrix dep =
      pairwise_dependency_matrix(vols, snap, a.min_overlap, threads);
  FilteredGraph g = a.no_tmfg ? complete_graph(dep) : tmfg(dep);
  CentralityScores scores = peripherality_scores(g, threads);

  std::filesystem::create_directories(a.out_dir);
  std::filesystem::path dir(a.out_dir);
  write_dependency_csv(dep, (dir / "dependency.csv").string());
  write_edge_list_csv(g, (dir / "edges.csv").string());
  write_insertion_log_csv(g, (dir / "insertion_log.csv").string());
  write_centrality_csv(g, scores, (dir / "centrality.csv").string());
  echo_config(sub, a.out_dir);

  std::cout << "as of " << format_date(as_of) << ": " << snap.firms.size()
            << " firms, " << g.edges.size() << " edges, retained weight "
            << shortest_double(g.retained_weight()) << "; outputs in "
            << a.out_dir << "\n";
  return 0;
}

struct BacktestArgs {
  std::string prices;
  std::string out_dir = "backtest_out";
  std::string strategies = "equal,network,mv,gat";
  std::string gat_checkpoint;
  std::string start, end;
  BacktestConfig bc;
  bool no_tmfg = false;
  bool no_warm_start = false;
};

int cmd_backtest(BacktestArgs a, CLI::App* sub) {
  a.bc.use_tmfg = !a.no_tmfg;
  a.bc.warm_start = !a.no_warm_start;
  if (!a.start.empty()) a.bc.start = parse_cli_date(a.start, "--start");
  if (!a.end.empty()) a.bc.end = parse_cli_date(a.end, "--end");
  std::vector<StrategySpec> specs =
      parse_strategy_list(a.strategies, a.bc.lambda_risk, a.gat_checkpoint);

  PricePanel panel = load_price_panel(a.prices);
  BacktestReport rep = run_backtest(panel, specs, a.bc);

  std::filesystem::create_directories(a.out_dir);
  std::filesystem::path dir(a.out_dir);
  write_report_json(rep, (dir / "report.json").string());
  write_figure_csvs(rep, a.out_dir);
  echo_config(sub, a.out_dir);

  std::cout << rep.splits.size() << " quarters evaluated, " << rep.skips.size()
            << " skipped; outputs in " << a.out_dir << "\n";
  for (const auto& agg : rep.aggregates) {
    std::cout << "  " << agg.strategy << ": mean test Sharpe "
              << shortest_double(agg.mean_sharpe_test) << " over "
              << agg.quarters << " quarters\n";
  }
  for (const auto& skip : rep.skips) {
    std::cout << "  skipped " << format_date(skip.rebalance) << ": "
              << skip.reason << "\n";
  }
  return 0;
}

struct ReportArgs {
  std::string report;
  std::string out_dir;
};

int cmd_report(const ReportArgs& a) {
  BacktestReport rep = load_report_json(a.report);
  std::string out_dir =
      a.out_dir.empty()
          ? std::filesystem::path(a.report).parent_path().string()
          : a.out_dir;
  if (out_dir.empty()) out_dir = ".";
  write_figure_csvs(rep, out_dir);
  std::cout << "re-rendered figure files for " << rep.rows.size()
            << " rows into " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Portfolio construction on filtered dependency graphs"};
  app.require_subcommand(1);

  GenerateArgs gen_args;
  CLI::App* gen =
      app.add_subcommand("generate", "Write a synthetic daily price panel");
  gen->add_option("--firms", gen_args.gc.n_firms, "Initial listed firms")
      ->capture_default_str();
  gen->add_option("--years", gen_args.gc.n_years, "Span in 252-day years")
      ->capture_default_str();
  gen->add_option("--sectors", gen_args.gc.n_sectors, "Sector count")
      ->capture_default_str();
  gen->add_option("--default-hazard", gen_args.gc.default_hazard,
                  "Annual default probability per firm")
      ->capture_default_str();
  gen->add_option("--exit-hazard", gen_args.gc.exit_hazard,
                  "Annual non-default delisting probability")
      ->capture_default_str();
  gen->add_option("--entry-rate", gen_args.gc.entry_rate,
                  "Expected new listings per year")
      ->capture_default_str();
  gen->add_option("--drift", gen_args.gc.daily_drift, "Daily log-price drift")
      ->capture_default_str();
  gen->add_option("--market-vol", gen_args.gc.market_vol,
                  "Daily market factor volatility")
      ->capture_default_str();
  gen->add_option("--sector-vol", gen_args.gc.sector_vol,
                  "Daily sector factor volatility")
      ->capture_default_str();
  gen->add_option("--idio-vol", gen_args.gc.idio_vol,
                  "Daily idiosyncratic volatility")
      ->capture_default_str();
  gen->add_option("--regime-mult", gen_args.gc.regime_high_mult,
                  "Volatility multiplier in the stressed regime")
      ->capture_default_str();
  gen->add_option("--p-enter-high", gen_args.gc.p_enter_high,
                  "Daily probability of entering the stressed regime")
      ->capture_default_str();
  gen->add_option("--p-exit-high", gen_args.gc.p_exit_high,
                  "Daily probability of leaving the stressed regime")
      ->capture_default_str();
  gen->add_option("--price-min", gen_args.gc.price_min,
                  "Lower bound of initial prices")
      ->capture_default_str();
  gen->add_option("--price-max", gen_args.gc.price_max,
                  "Upper bound of initial prices")
      ->capture_default_str();
  gen->add_option("--start", gen_args.start, "First calendar date (YYYY-MM-DD)")
      ->capture_default_str();
  gen->add_option("--seed", gen_args.seed, "Generator seed")
      ->capture_default_str();
  gen->add_option("--out", gen_args.out, "Output CSV path")
      ->capture_default_str();
  gen->set_config("--config", "", "Flat key=value config file");

  GraphArgs graph_args;
  CLI::App* graph = app.add_subcommand(
      "graph", "Build the dependency matrix, filtered graph, and centralities "
               "for one date");
  graph->add_option("--prices", graph_args.prices, "Input price CSV")
      ->required();
  graph->add_option("--as-of", graph_args.as_of,
                    "Snapshot date (default: last trading day)");
  graph->add_option("--out-dir", graph_args.out_dir, "Output directory")
      ->capture_default_str();
  graph->add_option("--lookback-T", graph_args.lookback_T,
                    "Feature/dependency window in trading days")
      ->capture_default_str();
  graph->add_option("--vol-lookback", graph_args.vol_lookback,
                    "Rolling volatility window")
      ->capture_default_str();
  graph->add_option("--min-overlap", graph_args.min_overlap,
                    "Minimum shared observations per pair")
      ->capture_default_str();
  graph->add_option("--min-history", graph_args.min_history,
                    "Minimum observations for universe membership")
      ->capture_default_str();
  graph->add_flag("--no-tmfg", graph_args.no_tmfg,
                  "Keep the complete dependency graph unfiltered");
  graph->add_option("--threads", graph_args.threads,
                    "Worker cap (0 = GRAPHFOLIO_THREADS or hardware)")
      ->capture_default_str();
  graph->set_config("--config", "", "Flat key=value config file");

  BacktestArgs bt_args;
  CLI::App* bt = app.add_subcommand(
      "backtest", "Run the rolling quarterly pipeline and write the report");
  bt->add_option("--prices", bt_args.prices, "Input price CSV")->required();
  bt->add_option("--out-dir", bt_args.out_dir, "Output directory")
      ->capture_default_str();
  bt->add_option("--strategies", bt_args.strategies,
                 "Comma list: equal,network,mv,gat")
      ->capture_default_str();
  bt->add_option("--lookback-T", bt_args.bc.lookback_T,
                 "Feature/dependency window in trading days")
      ->capture_default_str();
  bt->add_option("--vol-lookback", bt_args.bc.vol_lookback,
                 "Rolling volatility window")
      ->capture_default_str();
  bt->add_option("--min-overlap", bt_args.bc.min_overlap,
                 "Minimum shared observations per pair")
      ->capture_default_str();
  bt->add_option("--min-history", bt_args.bc.min_history,
                 "Minimum observations for universe membership")
      ->capture_default_str();
  bt->add_flag("--no-tmfg", bt_args.no_tmfg,
               "Keep the complete dependency graph unfiltered");
  bt->add_option("--heads", bt_args.bc.gat.K, "Attention heads")
      ->capture_default_str();
  bt->add_option("--head-width", bt_args.bc.gat.Tprime,
                 "Per-head output width")
      ->capture_default_str();
  bt->add_option("--hidden-width", bt_args.bc.gat.d1,
                 "First dense block width")
      ->capture_default_str();
  bt->add_option("--dropout", bt_args.bc.gat.dropout,
                 "Dropout rate after the first dense block")
      ->capture_default_str();
  bt->add_option("--l1", bt_args.bc.gat.l1,
                 "L1 coefficient on the final dense weights")
      ->capture_default_str();
  bt->add_option("--leaky-slope", bt_args.bc.gat.leaky_slope,
                 "Negative slope of the attention activation")
      ->capture_default_str();
  bt->add_option("--lr", bt_args.bc.train.lr, "Learning rate")
      ->capture_default_str();
  bt->add_option("--max-epochs", bt_args.bc.train.max_epochs,
                 "Training epoch cap per quarter")
      ->capture_default_str();
  bt->add_option("--patience", bt_args.bc.train.patience,
                 "Early-stopping patience in epochs")
      ->capture_default_str();
  bt->add_option("--lambda-risk", bt_args.bc.lambda_risk,
                 "Mean-variance risk aversion")
      ->capture_default_str();
  bt->add_option("--seed", bt_args.bc.seed, "Master seed")
      ->capture_default_str();
  bt->add_flag("--no-warm-start", bt_args.no_warm_start,
               "Re-initialize the network every quarter");
  bt->add_option("--gat-checkpoint", bt_args.gat_checkpoint,
                 "Fixed trained checkpoint (skips per-quarter training)");
  bt->add_option("--start", bt_args.start, "First rebalance date (YYYY-MM-DD)");
  bt->add_option("--end", bt_args.end, "Last rebalance date (YYYY-MM-DD)");
  bt->add_option("--threads", bt_args.bc.n_threads,
                 "Worker cap (0 = GRAPHFOLIO_THREADS or hardware)")
      ->capture_default_str();
  bt->set_config("--config", "", "Flat key=value config file");

  ReportArgs rep_args;
  CLI::App* rpt = app.add_subcommand(
      "report", "Re-render figure CSV files from an existing report JSON");
  rpt->add_option("--report", rep_args.report, "Path to report.json")
      ->required();
  rpt->add_option("--out-dir", rep_args.out_dir,
                  "Output directory (default: alongside the report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_generate(gen_args);
    if (*graph) return cmd_graph(graph_args, graph);
    if (*bt) return cmd_backtest(bt_args, bt);
    if (*rpt) return cmd_report(rep_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
