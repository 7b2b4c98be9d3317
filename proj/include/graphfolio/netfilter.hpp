#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graphfolio/dependency.hpp"

namespace graphfolio {

struct InsertionRecord {
  int vertex;
  std::array<int, 3> face;  // ascending vertex indices
  double gain;              // weight sum to the face, added in ascending order
};

struct FilteredGraph {
  std::vector<std::string> firms;
  std::vector<std::pair<int, int>> edges;  // i < j, construction order
  std::vector<double> weights;             // parallel to edges
  std::vector<std::array<int, 3>> faces;   // final triangulation faces, sorted
  std::array<int, 4> seed_clique{};
  std::vector<InsertionRecord> insertion_log;
  std::vector<std::vector<int>> adjacency;  // sorted neighbor lists

  int n() const { return int(firms.size()); }
  double retained_weight() const;
};

struct CentralityScores {
  Eigen::VectorXd degree;
  Eigen::VectorXd betweenness;
  Eigen::VectorXd closeness;
  Eigen::VectorXd peripherality;
};

// Greedy planar filter: seed tetrahedron on the 4 strongest vertices, then
// repeatedly insert the (vertex, face) pair of maximal gain, splitting the
// face in three. Ties break to the lowest vertex index, then the
// lexicographically smallest face. Exactly 3(n-2) edges remain.
FilteredGraph tmfg(const DependencyMatrix& dep);

// Helper for building graphs directly (tests, imports): edges as (i, j).
FilteredGraph graph_from_edges(std::vector<std::string> firms,
                               const std::vector<std::pair<int, int>>& edges,
                               const std::vector<double>& weights = {});

// Unfiltered alternative: every pair connected with its dependency weight.
FilteredGraph complete_graph(const DependencyMatrix& dep);

Eigen::VectorXd degree_centrality(const FilteredGraph& g);
// Shortest paths are hop counts; normalized by (n-1)(n-2)/2 so values sit in
// [0, 1] alongside the other two measures.
Eigen::VectorXd betweenness_centrality(const FilteredGraph& g, int n_threads = 1);
Eigen::VectorXd closeness_centrality(const FilteredGraph& g, int n_threads = 1);
CentralityScores peripherality_scores(const FilteredGraph& g, int n_threads = 1);

void write_edge_list_csv(const FilteredGraph& g, const std::string& path);
void write_insertion_log_csv(const FilteredGraph& g, const std::string& path);
void write_centrality_csv(const FilteredGraph& g,
                          const CentralityScores& scores,
                          const std::string& path);

}  // namespace graphfolio
