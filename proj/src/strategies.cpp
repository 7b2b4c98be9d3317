#include "graphfolio/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "graphfolio/text.hpp"

namespace graphfolio {

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::equal: return "equal";
    case StrategyKind::network_index: return "network_index";
    case StrategyKind::mean_variance: return "mean_variance";
    case StrategyKind::gat: return "gat";
  }
  throw ConfigError("unknown strategy kind");
}

StrategyKind strategy_from_name(const std::string& name) {
  if (name == "equal") return StrategyKind::equal;
  if (name == "network_index") return StrategyKind::network_index;
  if (name == "mean_variance") return StrategyKind::mean_variance;
  if (name == "gat") return StrategyKind::gat;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected equal, network_index, mean_variance, gat)");
}

void validate(const StrategySpec& spec) {
  if (spec.kind == StrategyKind::mean_variance && !(spec.lambda_risk > 0.0)) {
    throw ConfigError("mean_variance requires lambda_risk > 0");
  }
  if (spec.kind != StrategyKind::gat && !spec.checkpoint_path.empty()) {
    throw ConfigError("checkpoint_path is only meaningful for the gat strategy");
  }
}

std::vector<StrategySpec> parse_strategy_list(const std::string& csv,
                                              double lambda_risk,
                                              const std::string& checkpoint) {
  std::vector<StrategySpec> out;
  for (std::string_view raw : split_view(csv, ',')) {
    while (!raw.empty() && raw.front() == ' ') raw.remove_prefix(1);
    while (!raw.empty() && raw.back() == ' ') raw.remove_suffix(1);
    if (raw.empty()) continue;
    std::string token(raw);
    StrategySpec spec;
    if (token == "equal") {
      spec.kind = StrategyKind::equal;
    } else if (token == "network" || token == "network_index") {
      spec.kind = StrategyKind::network_index;
    } else if (token == "mv" || token == "mean_variance") {
      spec.kind = StrategyKind::mean_variance;
    } else if (token == "gat") {
      spec.kind = StrategyKind::gat;
      spec.checkpoint_path = checkpoint;
    } else {
      throw ConfigError("unknown strategy '" + token +
                        "' (expected equal, network, mv, gat)");
    }
    if (spec.kind == StrategyKind::mean_variance) {
      spec.lambda_risk = lambda_risk;
    }
    out.push_back(std::move(spec));
  }
  if (out.empty()) throw ConfigError("no strategies selected");
  return out;
}

PortfolioWeights equal_weight(const UniverseSnapshot& snapshot) {
  size_t n = snapshot.firms.size();
  if (n == 0) throw DataError("empty universe snapshot");
  PortfolioWeights out;
  out.as_of = snapshot.as_of;
  out.firms = snapshot.firms;
  out.weights = Eigen::VectorXd::Constant(long(n), 1.0 / double(n));
  return out;
}

PortfolioWeights network_index_weights(const CentralityScores& scores,
                                       const UniverseSnapshot& snapshot) {
  long n = scores.peripherality.size();
  if (n == 0) throw DataError("empty centrality scores");
  if (size_t(n) != snapshot.firms.size()) {
    throw PipelineError("centrality scores cover " + std::to_string(n) +
                        " firms but the snapshot has " +
                        std::to_string(snapshot.firms.size()));
  }

  Eigen::VectorXd p = scores.peripherality;
  double min_positive = std::numeric_limits<double>::infinity();
  bool any_nonpositive = false;
  for (long i = 0; i < n; ++i) {
    if (p(i) > 0.0) {
      min_positive = std::min(min_positive, p(i));
    } else {
      any_nonpositive = true;
    }
  }
  if (!std::isfinite(min_positive)) {
    throw PipelineError("no positive peripherality score to invert");
  }
  if (any_nonpositive) {
    for (long i = 0; i < n; ++i) {
      if (!(p(i) > 0.0)) p(i) = min_positive;
    }
  }

  Eigen::VectorXd inv = p.cwiseInverse();
  PortfolioWeights out;
  out.as_of = snapshot.as_of;
  out.firms = snapshot.firms;
  out.weights = inv / inv.sum();
  out.guarded = any_nonpositive;
  return out;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  long n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0;
  double theta = 0.0;
  for (long j = 0; j < n; ++j) {
    css += u[size_t(j)];
    double candidate = (css - 1.0) / double(j + 1);
    if (u[size_t(j)] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

namespace {

// Stationarity gap on the simplex: active assets must share the reduced
// gradient's common value; inactive ones must not exceed it.
double kkt_residual(const Eigen::VectorXd& w, const Eigen::VectorXd& grad) {
  double nu = 0.0;
  long active = 0;
  for (long i = 0; i < w.size(); ++i) {
    if (w(i) > 1e-12) {
      nu += grad(i);
      ++active;
    }
  }
  nu /= double(active);
  double res = 0.0;
  for (long i = 0; i < w.size(); ++i) {
    if (w(i) > 1e-12) {
      res = std::max(res, std::abs(grad(i) - nu));
    } else {
      res = std::max(res, std::max(0.0, grad(i) - nu));
    }
  }
  return res;
}

}  // namespace

PortfolioWeights mean_variance_weights(const CovMatrix& cov,
                                       double lambda_risk) {
  if (!(lambda_risk > 0.0)) throw ConfigError("lambda_risk must be > 0");
  long n = cov.values.rows();
  if (n == 0) throw DataError("empty covariance matrix");
  if (cov.values.cols() != n || cov.means.size() != n ||
      size_t(n) != cov.firms.size()) {
    throw DataError("covariance matrix, means, and firms sizes disagree");
  }
  if (!(cov.values.array() == cov.values.transpose().array()).all()) {
    throw DataError("covariance matrix is not symmetric");
  }

  const Eigen::MatrixXd& S = cov.values;
  const Eigen::VectorXd& mu = cov.means;

  double lipschitz = 2.0 * lambda_risk * S.cwiseAbs().rowwise().sum().maxCoeff();
  double base_step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;
  double max_step = 64.0 * base_step;

  auto objective = [&](const Eigen::VectorXd& w) {
    return mu.dot(w) - lambda_risk * w.dot(S * w);
  };

  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / double(n));
  double fw = objective(w);
  Eigen::VectorXd grad = mu - 2.0 * lambda_risk * (S * w);

  constexpr int kMaxIter = 10000;
  constexpr double kTarget = 1e-9;
  constexpr double kAcceptable = 1e-6;

  double step = base_step;
  double residual = kkt_residual(w, grad);
  for (int iter = 0; iter < kMaxIter && residual >= kTarget; ++iter) {
    bool moved = false;
    while (step >= 1e-18 * base_step) {
      Eigen::VectorXd cand = project_to_simplex(w + step * grad);
      double fc = objective(cand);
      if (fc >= fw) {
        w = std::move(cand);
        fw = fc;
        moved = true;
        step = std::min(step * 1.5, max_step);
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // step underflow: stationary to machine precision
    grad = mu - 2.0 * lambda_risk * (S * w);
    residual = kkt_residual(w, grad);
  }

  if (residual >= kTarget && residual > kAcceptable) {
    throw MeanVarianceError(
        "simplex solver stopped at stationarity residual " +
            std::to_string(residual) + " (acceptable: 1e-6) after " +
            std::to_string(kMaxIter) + " iterations",
        w, residual);
  }

  PortfolioWeights out;
  out.as_of = cov.as_of;
  out.firms = cov.firms;
  out.weights = std::move(w);
  return out;
}

PortfolioWeights gat_weights(const GatParams& params,
                             const UniverseSnapshot& snapshot,
                             const FilteredGraph& g) {
  Eigen::MatrixXd H = gat_forward(params, snapshot.features, g, Mode::infer);
  Eigen::VectorXd s2 = dense_blocks_forward(params, H, Mode::infer);
  PortfolioWeights out = allocation_layer(s2);
  out.as_of = snapshot.as_of;
  out.firms = snapshot.firms;
  return out;
}

void write_weights_csv(const std::vector<LabeledWeights>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write weights file '" + path + "'");
  out << "as_of,firm_id,weight,strategy\n";
  for (const auto& entry : rows) {
    const PortfolioWeights& w = entry.weights;
    if (size_t(w.weights.size()) != w.firms.size()) {
      throw PipelineError("weight vector does not match firm list");
    }
    std::string date = format_date(w.as_of);
    for (size_t i = 0; i < w.firms.size(); ++i) {
      out << date << ',' << w.firms[i] << ','
          << shortest_double(w.weights(long(i))) << ',' << entry.strategy
          << '\n';
    }
  }
  if (!out) throw DataError("failed writing weights file '" + path + "'");
}

}  // namespace graphfolio
