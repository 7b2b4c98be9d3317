#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphfolio/dependency.hpp"
#include "graphfolio/errors.hpp"
#include "graphfolio/gatnet.hpp"
#include "graphfolio/netfilter.hpp"

namespace graphfolio {

enum class StrategyKind { equal, network_index, mean_variance, gat };

std::string strategy_name(StrategyKind kind);
StrategyKind strategy_from_name(const std::string& name);

struct StrategySpec {
  StrategyKind kind = StrategyKind::equal;
  double lambda_risk = 1.0;      // mean_variance only
  std::string checkpoint_path;   // gat only; empty means train in-loop
};

void validate(const StrategySpec& spec);

// Comma list of strategy tokens ("equal,network,mv,gat"; long names accepted
// too). lambda_risk goes to mean_variance specs, checkpoint to gat specs.
std::vector<StrategySpec> parse_strategy_list(const std::string& csv,
                                              double lambda_risk = 1.0,
                                              const std::string& checkpoint = "");

// Thrown when the simplex solver hits its iteration cap while still outside
// the acceptable stationarity band; carries the best iterate found.
struct MeanVarianceError : PipelineError {
  MeanVarianceError(const std::string& msg, Eigen::VectorXd iterate,
                    double residual)
      : PipelineError(msg),
        best_iterate(std::move(iterate)),
        kkt_residual(residual) {}
  Eigen::VectorXd best_iterate;
  double kkt_residual;
};

// Uniform 1/n weights over the snapshot firms.
PortfolioWeights equal_weight(const UniverseSnapshot& snapshot);

// Weights proportional to inverse peripherality: w_i = (1/p_i) / sum(1/p_j).
// Non-positive p entries (impossible on connected graphs, guarded anyway) are
// replaced by the smallest positive p and the guarded flag is set.
PortfolioWeights network_index_weights(const CentralityScores& scores,
                                       const UniverseSnapshot& snapshot);

// Maximizes mean'w - lambda * w'Cov w over the simplex {w >= 0, sum w = 1}
// by projected gradient ascent with step halving. Returns once every active
// asset shares the same reduced gradient within 1e-9 (inactive ones below
// it); raises MeanVarianceError if still above 1e-6 after 10000 iterations.
PortfolioWeights mean_variance_weights(const CovMatrix& cov,
                                       double lambda_risk);

// Inference pass of the trained allocation network on the snapshot features.
PortfolioWeights gat_weights(const GatParams& params,
                             const UniverseSnapshot& snapshot,
                             const FilteredGraph& g);

// Euclidean projection onto the probability simplex (exposed for tests).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

struct LabeledWeights {
  PortfolioWeights weights;
  std::string strategy;
};

// CSV rows `as_of,firm_id,weight,strategy`, one row per (entry, firm).
void write_weights_csv(const std::vector<LabeledWeights>& rows,
                       const std::string& path);

}  // namespace graphfolio
