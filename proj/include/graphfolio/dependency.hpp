#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphfolio/market_data.hpp"

namespace graphfolio {

struct DependencyMatrix {
  Date as_of = 0;
  std::vector<std::string> firms;
  Eigen::MatrixXd values;  // symmetric, entries in [0, 1]
  int min_overlap = 60;
};

struct CovMatrix {
  Date as_of = 0;
  std::vector<std::string> firms;
  Eigen::MatrixXd values;
  Eigen::VectorXd means;
  // Pairs whose overlap was too thin for a covariance (entry left at 0).
  std::vector<std::pair<int, int>> sparse_pairs;
};

// (1/T^2) * sum of the elementwise product of the two double-centered
// distance matrices; negative floating-point residue is clamped to 0.
double distance_covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// dcov(a,b) / sqrt(dcov(a,a) * dcov(b,b)), 0 when either series is constant.
double distance_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Rows are series; NaN marks a missing observation. Each pair (diagonal
// included) is aligned on its mutually observed columns; entries whose
// overlap is below min_overlap stay 0. The pair list is split into one
// contiguous chunk per worker and every cell has a single writer, so the
// result is bit-identical for any worker count.
Eigen::MatrixXd pairwise_dcor(const Eigen::MatrixXd& rows, int min_overlap,
                              int n_threads = 1);

DependencyMatrix pairwise_dependency_matrix(const VolPanel& vols,
                                            const UniverseSnapshot& snapshot,
                                            int min_overlap = 60,
                                            int n_threads = 1);

// Pairwise-complete sample covariance of daily returns over the snapshot's
// lookback window, with per-firm mean returns.
CovMatrix sample_covariance(const ReturnPanel& returns,
                            const UniverseSnapshot& snapshot);

void write_dependency_csv(const DependencyMatrix& dep, const std::string& path);
DependencyMatrix read_dependency_csv(const std::string& path, Date as_of = 0);

}  // namespace graphfolio
