#include "graphfolio/netfilter.hpp"

#include <algorithm>
#include <fstream>
#include <queue>

#include "graphfolio/errors.hpp"
#include "graphfolio/text.hpp"
#include "graphfolio/threading.hpp"

namespace graphfolio {

namespace {

using Face = std::array<int, 3>;

Face sorted_face(int a, int b, int c) {
  Face f{a, b, c};
  std::sort(f.begin(), f.end());
  return f;
}

// Weights added in ascending vertex order so a replay can reproduce the sum
// bit for bit.
double face_gain(const Eigen::MatrixXd& D, int v, const Face& f) {
  return D(v, f[0]) + D(v, f[1]) + D(v, f[2]);
}

void build_adjacency(FilteredGraph& g) {
  g.adjacency.assign(size_t(g.n()), {});
  for (auto [i, j] : g.edges) {
    g.adjacency[size_t(i)].push_back(j);
    g.adjacency[size_t(j)].push_back(i);
  }
  for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
}

}  // namespace

double FilteredGraph::retained_weight() const {
  double sum = 0.0;
  for (double w : weights) sum += w;
  return sum;
}

FilteredGraph tmfg(const DependencyMatrix& dep) {
  const Eigen::MatrixXd& D = dep.values;
  long n = D.rows();
  if (n < 4) {
    throw DataError("TMFG needs at least 4 firms, got " + std::to_string(n));
  }
  if (D.cols() != n) throw DataError("dependency matrix is not square");
  for (long i = 0; i < n; ++i) {
    for (long j = i + 1; j < n; ++j) {
      if (D(i, j) != D(j, i)) {
        throw DataError("dependency matrix is not symmetric at (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }

  FilteredGraph g;
  g.firms = dep.firms;

  // Seed: the four vertices of largest strength (off-diagonal row sums).
  std::vector<double> strength(static_cast<size_t>(n), 0.0);
  for (long i = 0; i < n; ++i) {
    double s = 0.0;
    for (long j = 0; j < n; ++j) {
      if (j != i) s += D(i, j);
    }
    strength[size_t(i)] = s;
  }
  std::vector<int> by_strength(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) by_strength[size_t(i)] = int(i);
  std::sort(by_strength.begin(), by_strength.end(), [&](int a, int b) {
    if (strength[size_t(a)] != strength[size_t(b)]) {
      return strength[size_t(a)] > strength[size_t(b)];
    }
    return a < b;
  });
  std::array<int, 4> seed{by_strength[0], by_strength[1], by_strength[2],
                          by_strength[3]};
  std::sort(seed.begin(), seed.end());
  g.seed_clique = seed;

  auto add_edge = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    g.edges.emplace_back(a, b);
    g.weights.push_back(D(a, b));
  };
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) add_edge(seed[size_t(i)], seed[size_t(j)]);
  }

  std::vector<Face> face_list;
  std::vector<char> alive;
  auto push_face = [&](const Face& f) {
    face_list.push_back(f);
    alive.push_back(1);
  };
  push_face({seed[0], seed[1], seed[2]});
  push_face({seed[0], seed[1], seed[3]});
  push_face({seed[0], seed[2], seed[3]});
  push_face({seed[1], seed[2], seed[3]});

  std::vector<int> remaining;
  {
    std::vector<char> in_seed(static_cast<size_t>(n), 0);
    for (int s : seed) in_seed[size_t(s)] = 1;
    for (long i = 0; i < n; ++i) {
      if (!in_seed[size_t(i)]) remaining.push_back(int(i));
    }
  }

  struct Best {
    double gain = -1.0;
    int face = -1;
  };
  // Equal gains prefer the lexicographically smaller face; the comparison is
  // order-independent, so rescans need no particular face ordering.
  auto better = [&](double gain, int face, const Best& cur) {
    if (cur.face < 0) return true;
    if (gain != cur.gain) return gain > cur.gain;
    return face_list[size_t(face)] < face_list[size_t(cur.face)];
  };
  std::vector<Best> best(static_cast<size_t>(n));
  auto rescan = [&](int u) {
    Best b;
    for (size_t f = 0; f < face_list.size(); ++f) {
      if (!alive[f]) continue;
      double gain = face_gain(D, u, face_list[f]);
      if (better(gain, int(f), b)) b = {gain, int(f)};
    }
    best[size_t(u)] = b;
  };
  for (int u : remaining) rescan(u);

  while (!remaining.empty()) {
    // Lowest index wins ties: scan ascending, move only on strictly better.
    int pick = -1;
    for (size_t k = 0; k < remaining.size(); ++k) {
      int u = remaining[k];
      if (pick < 0) {
        pick = int(k);
        continue;
      }
      const Best& cur = best[size_t(remaining[size_t(pick)])];
      const Best& cand = best[size_t(u)];
      if (cand.gain > cur.gain) pick = int(k);
    }
    int v = remaining[size_t(pick)];
    int face_idx = best[size_t(v)].face;
    Face face = face_list[size_t(face_idx)];
    g.insertion_log.push_back({v, face, best[size_t(v)].gain});
    add_edge(v, face[0]);
    add_edge(v, face[1]);
    add_edge(v, face[2]);
    alive[size_t(face_idx)] = 0;
    int first_new = int(face_list.size());
    push_face(sorted_face(face[0], face[1], v));
    push_face(sorted_face(face[0], face[2], v));
    push_face(sorted_face(face[1], face[2], v));

    remaining.erase(remaining.begin() + pick);
    for (int u : remaining) {
      if (best[size_t(u)].face == face_idx) {
        rescan(u);
        continue;
      }
      for (int f = first_new; f < first_new + 3; ++f) {
        double gain = face_gain(D, u, face_list[size_t(f)]);
        if (better(gain, f, best[size_t(u)])) best[size_t(u)] = {gain, f};
      }
    }
  }

  for (size_t f = 0; f < face_list.size(); ++f) {
    if (alive[f]) g.faces.push_back(face_list[f]);
  }
  std::sort(g.faces.begin(), g.faces.end());

  if (long(g.edges.size()) != 3 * (n - 2)) {
    throw PipelineError("TMFG edge count is not 3(n-2)");
  }
  build_adjacency(g);
  return g;
}

FilteredGraph graph_from_edges(std::vector<std::string> firms,
                               const std::vector<std::pair<int, int>>& edges,
                               const std::vector<double>& weights) {
  FilteredGraph g;
  g.firms = std::move(firms);
  for (size_t k = 0; k < edges.size(); ++k) {
    auto [i, j] = edges[k];
    if (i > j) std::swap(i, j);
    g.edges.emplace_back(i, j);
    g.weights.push_back(weights.empty() ? 1.0 : weights[k]);
  }
  build_adjacency(g);
  return g;
}

FilteredGraph complete_graph(const DependencyMatrix& dep) {
  int n = int(dep.firms.size());
  std::vector<std::pair<int, int>> edges;
  std::vector<double> weights;
  edges.reserve(size_t(n) * size_t(n > 0 ? n - 1 : 0) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      edges.emplace_back(i, j);
      weights.push_back(dep.values(i, j));
    }
  }
  return graph_from_edges(dep.firms, edges, weights);
}

Eigen::VectorXd degree_centrality(const FilteredGraph& g) {
  long n = g.n();
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(n);
  if (n < 2) return dc;
  for (long i = 0; i < n; ++i) {
    dc(i) = double(g.adjacency[size_t(i)].size()) / double(n - 1);
  }
  return dc;
}

namespace {

// Brandes accumulation from one source into acc (adds the ordered-pair
// dependencies; the caller halves and normalizes).
void brandes_source(const FilteredGraph& g, int s, std::vector<double>& sigma,
                    std::vector<int>& dist, std::vector<double>& delta,
                    std::vector<std::vector<int>>& preds, std::vector<int>& order,
                    double* acc) {
  size_t n = size_t(g.n());
  sigma.assign(n, 0.0);
  dist.assign(n, -1);
  delta.assign(n, 0.0);
  order.clear();
  for (auto& p : preds) p.clear();

  sigma[size_t(s)] = 1.0;
  dist[size_t(s)] = 0;
  std::queue<int> queue;
  queue.push(s);
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop();
    order.push_back(v);
    for (int w : g.adjacency[size_t(v)]) {
      if (dist[size_t(w)] < 0) {
        dist[size_t(w)] = dist[size_t(v)] + 1;
        queue.push(w);
      }
      if (dist[size_t(w)] == dist[size_t(v)] + 1) {
        sigma[size_t(w)] += sigma[size_t(v)];
        preds[size_t(w)].push_back(v);
      }
    }
  }
  for (size_t k = order.size(); k-- > 0;) {
    int v = order[k];
    for (int p : preds[size_t(v)]) {
      delta[size_t(p)] +=
          sigma[size_t(p)] / sigma[size_t(v)] * (1.0 + delta[size_t(v)]);
    }
    if (v != s) acc[v] += delta[size_t(v)];
  }
}

constexpr int kSourceBlock = 64;

}  // namespace

Eigen::VectorXd betweenness_centrality(const FilteredGraph& g, int n_threads) {
  long n = g.n();
  Eigen::VectorXd bc = Eigen::VectorXd::Zero(n);
  if (n < 3) return bc;

  // Sources are grouped into fixed blocks with one partial vector each;
  // partials are reduced in block order, so the floating-point sum does not
  // depend on the worker count.
  size_t n_blocks = (size_t(n) + kSourceBlock - 1) / kSourceBlock;
  std::vector<std::vector<double>> partials(n_blocks);
  int workers = resolve_threads(n_threads);
  parallel_chunks(n_blocks, workers, [&](size_t begin, size_t end) {
    std::vector<double> sigma;
    std::vector<int> dist, order;
    std::vector<double> delta;
    std::vector<std::vector<int>> preds(static_cast<size_t>(n));
    for (size_t blk = begin; blk < end; ++blk) {
      auto& acc = partials[blk];
      acc.assign(size_t(n), 0.0);
      int lo = int(blk) * kSourceBlock;
      int hi = std::min(int(n), lo + kSourceBlock);
      for (int s = lo; s < hi; ++s) {
        brandes_source(g, s, sigma, dist, delta, preds, order, acc.data());
      }
    }
  });

  for (size_t blk = 0; blk < n_blocks; ++blk) {
    for (long v = 0; v < n; ++v) bc(v) += partials[blk][size_t(v)];
  }
  // Ordered pairs counted twice, then scaled by the (n-1)(n-2)/2 pair count.
  double denom = double(n - 1) * double(n - 2);
  for (long v = 0; v < n; ++v) bc(v) /= denom;
  return bc;
}

Eigen::VectorXd closeness_centrality(const FilteredGraph& g, int n_threads) {
  long n = g.n();
  Eigen::VectorXd cc = Eigen::VectorXd::Zero(n);
  if (n < 2) return cc;

  int workers = resolve_threads(n_threads);
  parallel_chunks(size_t(n), workers, [&](size_t begin, size_t end) {
    std::vector<int> dist;
    std::queue<int> queue;
    for (size_t s = begin; s < end; ++s) {
      dist.assign(size_t(n), -1);
      dist[s] = 0;
      queue.push(int(s));
      long sum = 0, reached = 0;
      while (!queue.empty()) {
        int v = queue.front();
        queue.pop();
        sum += dist[size_t(v)];
        ++reached;
        for (int w : g.adjacency[size_t(v)]) {
          if (dist[size_t(w)] < 0) {
            dist[size_t(w)] = dist[size_t(v)] + 1;
            queue.push(w);
          }
        }
      }
      if (reached != n) throw DataError("graph is not connected");
      cc(long(s)) = double(n - 1) / double(sum);
    }
  });
  return cc;
}

CentralityScores peripherality_scores(const FilteredGraph& g, int n_threads) {
  CentralityScores scores;
  scores.degree = degree_centrality(g);
  scores.betweenness = betweenness_centrality(g, n_threads);
  scores.closeness = closeness_centrality(g, n_threads);
  scores.peripherality =
      (scores.degree + scores.betweenness + scores.closeness) / 3.0;
  return scores;
}

void write_edge_list_csv(const FilteredGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write edge list '" + path + "'");
  out << "src_firm,dst_firm,weight\n";
  for (size_t k = 0; k < g.edges.size(); ++k) {
    out << g.firms[size_t(g.edges[k].first)] << ','
        << g.firms[size_t(g.edges[k].second)] << ','
        << shortest_double(g.weights[k]) << '\n';
  }
}

void write_insertion_log_csv(const FilteredGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write insertion log '" + path + "'");
  out << "step,vertex,face_a,face_b,face_c,gain\n";
  for (size_t k = 0; k < g.insertion_log.size(); ++k) {
    const InsertionRecord& rec = g.insertion_log[k];
    out << k << ',' << g.firms[size_t(rec.vertex)] << ','
        << g.firms[size_t(rec.face[0])] << ',' << g.firms[size_t(rec.face[1])]
        << ',' << g.firms[size_t(rec.face[2])] << ','
        << shortest_double(rec.gain) << '\n';
  }
}

void write_centrality_csv(const FilteredGraph& g,
                          const CentralityScores& scores,
                          const std::string& path) {
  if (scores.peripherality.size() != g.n()) {
    throw PipelineError("centrality scores do not match the graph");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write centrality file '" + path + "'");
  out << "firm_id,dc,bc,cc,p\n";
  for (long i = 0; i < g.n(); ++i) {
    out << g.firms[size_t(i)] << ',' << shortest_double(scores.degree(i))
        << ',' << shortest_double(scores.betweenness(i)) << ','
        << shortest_double(scores.closeness(i)) << ','
        << shortest_double(scores.peripherality(i)) << '\n';
  }
}

}  // namespace graphfolio
