// Python bindings for the portfolio-construction core.
//
// The surface is deliberately small and numpy-first: plain matrices and
// vectors in, plain dicts/tuples out. Anything that needs the full typed
// object model (panels, reports) goes through files and JSON, same as the
// command-line tool.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "graphfolio/backtest.hpp"
#include "graphfolio/date.hpp"
#include "graphfolio/dependency.hpp"
#include "graphfolio/errors.hpp"
#include "graphfolio/gatnet.hpp"
#include "graphfolio/market_data.hpp"
#include "graphfolio/netfilter.hpp"
#include "graphfolio/strategies.hpp"
#include "graphfolio/synthetic.hpp"

namespace py = pybind11;
using namespace graphfolio;

namespace {

std::vector<std::string> index_names(Eigen::Index n) {
  std::vector<std::string> names(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) names[static_cast<size_t>(i)] = std::to_string(i);
  return names;
}

DependencyMatrix dep_from_values(const Eigen::MatrixXd& values) {
  if (values.rows() != values.cols()) {
    throw DataError("dependency matrix must be square");
  }
  DependencyMatrix dep;
  dep.as_of = 0;
  dep.firms = index_names(values.rows());
  dep.values = values;
  return dep;
}

py::dict graph_to_dict(const FilteredGraph& g) {
  py::list edges;
  for (size_t e = 0; e < g.edges.size(); ++e) {
    edges.append(py::make_tuple(g.edges[e].first, g.edges[e].second, g.weights[e]));
  }
  py::dict out;
  out["edges"] = edges;
  out["seed_clique"] = py::make_tuple(g.seed_clique[0], g.seed_clique[1],
                                      g.seed_clique[2], g.seed_clique[3]);
  out["retained_weight"] = g.retained_weight();
  return out;
}

py::dict centralities_to_dict(const CentralityScores& s) {
  py::dict out;
  out["degree"] = s.degree;
  out["betweenness"] = s.betweenness;
  out["closeness"] = s.closeness;
  out["peripherality"] = s.peripherality;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Portfolio construction on distance-correlation dependency graphs";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<PipelineError>(m, "PipelineError", PyExc_RuntimeError);

  m.def("distance_covariance", &distance_covariance, py::arg("a"), py::arg("b"),
        "Squared sample distance covariance of two equal-length series.");

  m.def("distance_correlation", &distance_correlation, py::arg("a"), py::arg("b"),
        "Sample distance correlation in [0, 1]; exactly 1.0 for a == b.");

  m.def(
      "pairwise_dcor",
      [](const Eigen::MatrixXd& rows, int min_overlap, int n_threads) {
        return pairwise_dcor(rows, min_overlap, n_threads);
      },
      py::arg("rows"), py::arg("min_overlap") = 60, py::arg("n_threads") = 1,
      "Pairwise distance correlation over row series; NaN cells mark missing\n"
      "observations, pairs with fewer than min_overlap shared finite columns\n"
      "score 0.");

  m.def(
      "tmfg",
      [](const Eigen::MatrixXd& dependency) {
        return graph_to_dict(tmfg(dep_from_values(dependency)));
      },
      py::arg("dependency"),
      "Triangulated maximally filtered graph of a square dependency matrix.\n"
      "Returns {'edges': [(i, j, weight)], 'seed_clique': (a, b, c, d),\n"
      "'retained_weight': float}; edge count is 3(n - 2).");

  m.def(
      "graph_centralities",
      [](int n, const std::vector<std::pair<int, int>>& edges,
         const std::vector<double>& weights) {
        if (!weights.empty() && weights.size() != edges.size()) {
          throw DataError("weights must be empty or match the edge count");
        }
        std::vector<double> w = weights;
        if (w.empty()) w.assign(edges.size(), 1.0);
        FilteredGraph g = graph_from_edges(index_names(n), edges, w);
        CentralityScores s = peripherality_scores(g);
        return centralities_to_dict(s);
      },
      py::arg("n"), py::arg("edges"), py::arg("weights") = std::vector<double>{},
      "Degree, betweenness, closeness and peripherality for an undirected\n"
      "graph on n nodes (hop-count shortest paths; weights only echo through\n"
      "to the structure, not the distances).");

  m.def(
      "allocate",
      [](const Eigen::VectorXd& scores) {
        PortfolioWeights pw = allocation_layer(scores);
        return py::make_tuple(pw.weights, pw.fallback_equal);
      },
      py::arg("scores"),
      "Normalize non-negative scores to portfolio weights. Returns\n"
      "(weights, fallback_equal); fallback_equal is True when the scores\n"
      "summed below 1e-12 and equal weights were substituted.");

  m.def(
      "sharpe_loss",
      [](const Eigen::VectorXd& weights, const Eigen::MatrixXd& window_returns,
         double l1_penalty) {
        bool surrogate = false;
        double loss = sharpe_loss(weights, window_returns, l1_penalty, &surrogate);
        py::dict out;
        out["loss"] = loss;
        out["surrogate"] = surrogate;
        return out;
      },
      py::arg("weights"), py::arg("window_returns"), py::arg("l1_penalty") = 0.0,
      "Negative-log-Sharpe training loss of a fixed-weight portfolio over a\n"
      "returns window (rows = firms, columns = days). Falls back to the\n"
      "linear surrogate when the mean daily return is non-positive.");

  m.def(
      "mean_variance",
      [](const Eigen::MatrixXd& cov, const Eigen::VectorXd& means,
         double lambda_risk) {
        if (cov.rows() != cov.cols() || cov.rows() != means.size()) {
          throw DataError("covariance must be square and match means length");
        }
        CovMatrix c;
        c.as_of = 0;
        c.firms = index_names(cov.rows());
        c.values = cov;
        c.means = means;
        PortfolioWeights w = mean_variance_weights(c, lambda_risk);
        return w.weights;
      },
      py::arg("cov"), py::arg("means"), py::arg("lambda_risk") = 1.0,
      "Long-only simplex portfolio maximizing means'w - lambda * w'Cov w by\n"
      "projected gradient ascent.");

  m.def(
      "network_index",
      [](const Eigen::VectorXd& peripherality) {
        UniverseSnapshot snap;
        snap.as_of = 0;
        snap.firms = index_names(peripherality.size());
        CentralityScores s;
        s.peripherality = peripherality;
        s.degree = s.betweenness = s.closeness =
            Eigen::VectorXd::Zero(peripherality.size());
        PortfolioWeights w = network_index_weights(s, snap);
        return w.weights;
      },
      py::arg("peripherality"),
      "Weights proportional to inverse peripherality, normalized to sum 1.");

  m.def(
      "project_to_simplex",
      [](const Eigen::VectorXd& v) { return project_to_simplex(v); },
      py::arg("v"), "Euclidean projection onto {w >= 0, sum w = 1}.");

  m.def(
      "generate_market_csv",
      [](const std::string& path, int firms, double years, int sectors,
         double default_hazard, const std::string& start, uint64_t seed) {
        GeneratorConfig gc;
        gc.n_firms = firms;
        gc.n_years = years;
        gc.n_sectors = sectors;
        gc.default_hazard = default_hazard;
        gc.start_date = parse_date(start);
        PricePanel panel = generate_synthetic_market(gc, seed);
        write_price_panel(panel, path);
        py::dict out;
        out["path"] = path;
        out["firms"] = panel.firms.size();
        out["days"] = panel.calendar.size();
        out["realized_default_rate"] = realized_default_rate(panel);
        return out;
      },
      py::arg("path"), py::arg("firms") = 100, py::arg("years") = 5.0,
      py::arg("sectors") = 5, py::arg("default_hazard") = 0.015,
      py::arg("start") = "2015-01-01", py::arg("seed") = uint64_t{1},
      "Write a synthetic long-format price panel CSV and return its summary.");

  m.def(
      "run_backtest_json",
      [](const std::string& prices_path, const std::string& strategies,
         int lookback_T, int max_epochs, int patience, double lambda_risk,
         uint64_t seed, bool warm_start, int threads) {
        BacktestConfig bc;
        bc.lookback_T = lookback_T;
        bc.train.max_epochs = max_epochs;
        bc.train.patience = patience;
        bc.lambda_risk = lambda_risk;
        bc.seed = seed;
        bc.warm_start = warm_start;
        bc.n_threads = threads;
        std::vector<StrategySpec> specs =
            parse_strategy_list(strategies, lambda_risk, "");
        PricePanel panel = load_price_panel(prices_path);
        BacktestReport rep = run_backtest(panel, specs, bc);
        return report_to_json(rep);
      },
      py::arg("prices_path"), py::arg("strategies") = "equal,network,mv,gat",
      py::arg("lookback_T") = 756, py::arg("max_epochs") = 200,
      py::arg("patience") = 15, py::arg("lambda_risk") = 1.0,
      py::arg("seed") = uint64_t{1}, py::arg("warm_start") = true,
      py::arg("threads") = 0,
      "Run the rolling quarterly backtest on a price panel CSV and return\n"
      "the report as a JSON string (same schema the CLI writes).");

  m.attr("__version__") = "0.1.0";
}
