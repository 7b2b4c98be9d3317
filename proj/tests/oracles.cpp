#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <set>
#include <sstream>

namespace oracle {

namespace {

Eigen::MatrixXd centered_distances(const Eigen::VectorXd& x) {
  const Eigen::Index T = x.size();
  Eigen::MatrixXd d(T, T);
  for (Eigen::Index j = 0; j < T; ++j) {
    for (Eigen::Index k = 0; k < T; ++k) {
      d(j, k) = std::abs(x[j] - x[k]);
    }
  }
  Eigen::VectorXd row_mean(T), col_mean(T);
  for (Eigen::Index j = 0; j < T; ++j) row_mean[j] = d.row(j).mean();
  for (Eigen::Index k = 0; k < T; ++k) col_mean[k] = d.col(k).mean();
  const double grand = d.mean();
  Eigen::MatrixXd c(T, T);
  for (Eigen::Index j = 0; j < T; ++j) {
    for (Eigen::Index k = 0; k < T; ++k) {
      c(j, k) = d(j, k) - row_mean[j] - col_mean[k] + grand;
    }
  }
  return c;
}

}  // namespace

double dcov2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index T = a.size();
  const Eigen::MatrixXd A = centered_distances(a);
  const Eigen::MatrixXd B = centered_distances(b);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < T; ++j) {
    for (Eigen::Index k = 0; k < T; ++k) sum += A(j, k) * B(j, k);
  }
  double v = sum / double(T * T);
  return v < 0.0 ? 0.0 : v;
}

double dcor(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double vab = dcov2(a, b);
  const double vaa = dcov2(a, a);
  const double vbb = dcov2(b, b);
  if (vaa <= 0.0 || vbb <= 0.0) return 0.0;
  double r = vab / std::sqrt(vaa * vbb);
  if (r < 0.0) r = 0.0;
  if (r > 1.0) r = 1.0;
  return r;
}

Centralities centralities(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::set<int>> adj(static_cast<size_t>(n));
  for (const auto& [i, j] : edges) {
    adj[size_t(i)].insert(j);
    adj[size_t(j)].insert(i);
  }

  // Per-source hop distances and shortest-path counts by plain BFS.
  const int kUnreached = -1;
  std::vector<std::vector<int>> dist(static_cast<size_t>(n));
  std::vector<std::vector<double>> sigma(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) {
    auto& d = dist[size_t(s)];
    auto& sg = sigma[size_t(s)];
    d.assign(static_cast<size_t>(n), kUnreached);
    sg.assign(static_cast<size_t>(n), 0.0);
    d[size_t(s)] = 0;
    sg[size_t(s)] = 1.0;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int v : adj[size_t(u)]) {
        if (d[size_t(v)] == kUnreached) {
          d[size_t(v)] = d[size_t(u)] + 1;
          queue.push_back(v);
        }
        if (d[size_t(v)] == d[size_t(u)] + 1) sg[size_t(v)] += sg[size_t(u)];
      }
    }
  }

  Centralities out;
  out.degree.resize(n);
  out.betweenness = Eigen::VectorXd::Zero(n);
  out.closeness.resize(n);
  for (int v = 0; v < n; ++v) {
    out.degree[v] = n > 1 ? double(adj[size_t(v)].size()) / double(n - 1) : 0.0;
  }

  // Betweenness pair by pair: v lies on a shortest s-t path iff
  // d(s,v) + d(v,t) == d(s,t); such paths number sigma_s(v) * sigma_v(t).
  for (int s = 0; s < n; ++s) {
    for (int t = s + 1; t < n; ++t) {
      if (dist[size_t(s)][size_t(t)] == kUnreached) continue;
      const double total = sigma[size_t(s)][size_t(t)];
      if (total <= 0.0) continue;
      for (int v = 0; v < n; ++v) {
        if (v == s || v == t) continue;
        if (dist[size_t(s)][size_t(v)] == kUnreached ||
            dist[size_t(v)][size_t(t)] == kUnreached) {
          continue;
        }
        if (dist[size_t(s)][size_t(v)] + dist[size_t(v)][size_t(t)] ==
            dist[size_t(s)][size_t(t)]) {
          out.betweenness[v] +=
              sigma[size_t(s)][size_t(v)] * sigma[size_t(v)][size_t(t)] / total;
        }
      }
    }
  }
  if (n > 2) out.betweenness /= double(n - 1) * double(n - 2) / 2.0;

  for (int v = 0; v < n; ++v) {
    double sum = 0.0;
    bool all = true;
    for (int u = 0; u < n; ++u) {
      if (u == v) continue;
      if (dist[size_t(v)][size_t(u)] == kUnreached) {
        all = false;
        break;
      }
      sum += dist[size_t(v)][size_t(u)];
    }
    out.closeness[v] = (all && sum > 0.0) ? double(n - 1) / sum : 0.0;
  }

  out.peripherality =
      (out.degree + out.betweenness + out.closeness) / 3.0;
  return out;
}

namespace {

std::array<int, 3> sorted_face(int a, int b, int c) {
  std::array<int, 3> f{a, b, c};
  std::sort(f.begin(), f.end());
  return f;
}

std::string face_str(const std::array<int, 3>& f) {
  std::ostringstream os;
  os << "(" << f[0] << "," << f[1] << "," << f[2] << ")";
  return os.str();
}

}  // namespace

std::string check_tmfg(const Eigen::MatrixXd& dep,
                       const graphfolio::FilteredGraph& g) {
  const int n = int(dep.rows());
  std::ostringstream err;

  // Seed: the first four vertices under (strength desc, index asc).
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[size_t(i)] = i;
  std::vector<double> strength(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j != i) strength[size_t(i)] += dep(i, j);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    if (strength[size_t(x)] != strength[size_t(y)]) {
      return strength[size_t(x)] > strength[size_t(y)];
    }
    return x < y;
  });
  std::array<int, 4> want_seed{order[0], order[1], order[2], order[3]};
  std::sort(want_seed.begin(), want_seed.end());
  std::array<int, 4> got_seed = g.seed_clique;
  std::sort(got_seed.begin(), got_seed.end());
  if (want_seed != got_seed) {
    err << "seed clique mismatch";
    return err.str();
  }

  std::set<std::pair<int, int>> want_edges;
  auto add_edge = [&](int a, int b) {
    want_edges.insert({std::min(a, b), std::max(a, b)});
  };
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) add_edge(want_seed[size_t(a)], want_seed[size_t(b)]);
  }

  std::vector<bool> inserted(static_cast<size_t>(n), false);
  for (int v : want_seed) inserted[size_t(v)] = true;
  std::set<std::array<int, 3>> faces;
  faces.insert(sorted_face(want_seed[0], want_seed[1], want_seed[2]));
  faces.insert(sorted_face(want_seed[0], want_seed[1], want_seed[3]));
  faces.insert(sorted_face(want_seed[0], want_seed[2], want_seed[3]));
  faces.insert(sorted_face(want_seed[1], want_seed[2], want_seed[3]));

  if (int(g.insertion_log.size()) != n - 4) {
    err << "insertion log has " << g.insertion_log.size() << " records, want "
        << n - 4;
    return err.str();
  }

  for (size_t step = 0; step < g.insertion_log.size(); ++step) {
    const auto& rec = g.insertion_log[step];
    // Recompute the best (vertex, face) pair from scratch: maximal gain,
    // ties to the lowest vertex, then the lexicographically smallest face.
    double best_gain = -1.0;
    int best_vertex = -1;
    std::array<int, 3> best_face{-1, -1, -1};
    for (int v = 0; v < n; ++v) {
      if (inserted[size_t(v)]) continue;
      for (const auto& f : faces) {
        const double gain = dep(v, f[0]) + dep(v, f[1]) + dep(v, f[2]);
        const bool better =
            gain > best_gain ||
            (gain == best_gain &&
             (v < best_vertex || (v == best_vertex && f < best_face)));
        if (better) {
          best_gain = gain;
          best_vertex = v;
          best_face = f;
        }
      }
    }
    if (rec.vertex != best_vertex || rec.face != best_face ||
        rec.gain != best_gain) {
      err << "step " << step << ": recorded vertex " << rec.vertex << " face "
          << face_str(rec.face) << " gain " << rec.gain << ", replay picked "
          << best_vertex << " " << face_str(best_face) << " gain " << best_gain;
      return err.str();
    }
    faces.erase(best_face);
    faces.insert(sorted_face(best_vertex, best_face[0], best_face[1]));
    faces.insert(sorted_face(best_vertex, best_face[0], best_face[2]));
    faces.insert(sorted_face(best_vertex, best_face[1], best_face[2]));
    inserted[size_t(best_vertex)] = true;
    add_edge(best_vertex, best_face[0]);
    add_edge(best_vertex, best_face[1]);
    add_edge(best_vertex, best_face[2]);
  }

  std::set<std::pair<int, int>> got_edges(g.edges.begin(), g.edges.end());
  if (got_edges != want_edges) {
    err << "edge set mismatch: got " << got_edges.size() << " unique, want "
        << want_edges.size();
    return err.str();
  }
  if (int(g.edges.size()) != 3 * (n - 2)) {
    err << "edge count " << g.edges.size() << " != 3(n-2)";
    return err.str();
  }
  std::set<std::array<int, 3>> got_faces(g.faces.begin(), g.faces.end());
  if (got_faces != faces) {
    err << "face list mismatch";
    return err.str();
  }
  return "";
}

Eigen::MatrixXd gat_forward_loops(const graphfolio::GatParams& p,
                                  const Eigen::MatrixXd& X,
                                  const graphfolio::FilteredGraph& g) {
  const int n = int(X.rows());
  const int K = p.hyper.K;
  const int Tp = p.hyper.Tprime;
  const double slope = p.hyper.leaky_slope;
  Eigen::MatrixXd H(n, K * Tp);
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd& W = p.W[size_t(k)];
    const Eigen::VectorXd a1 = p.a[size_t(k)].head(Tp);
    const Eigen::VectorXd a2 = p.a[size_t(k)].tail(Tp);
    for (int u = 0; u < n; ++u) {
      std::vector<int> nbh(g.adjacency[size_t(u)].begin(),
                           g.adjacency[size_t(u)].end());
      nbh.push_back(u);
      std::sort(nbh.begin(), nbh.end());
      const Eigen::VectorXd zu = W * X.row(u).transpose();
      std::vector<Eigen::VectorXd> zs;
      std::vector<double> scores;
      for (int v : nbh) {
        Eigen::VectorXd zv = W * X.row(v).transpose();
        double e = a1.dot(zu) + a2.dot(zv);
        if (e < 0.0) e *= slope;
        zs.push_back(std::move(zv));
        scores.push_back(e);
      }
      const double mx = *std::max_element(scores.begin(), scores.end());
      double denom = 0.0;
      for (double& s : scores) {
        s = std::exp(s - mx);
        denom += s;
      }
      Eigen::VectorXd h = Eigen::VectorXd::Zero(Tp);
      for (size_t i = 0; i < zs.size(); ++i) h += (scores[i] / denom) * zs[i];
      for (int t = 0; t < Tp; ++t) H(u, k * Tp + t) = std::max(0.0, h[t]);
    }
  }
  return H;
}

double annualized_sharpe(const std::vector<double>& daily) {
  const double m = double(daily.size());
  double mean = 0.0;
  for (double r : daily) mean += r;
  mean /= m;
  double var = 0.0;
  for (double r : daily) var += (r - mean) * (r - mean);
  var /= m;
  const double sd = std::sqrt(var);
  if (sd == 0.0) return 0.0;
  return std::sqrt(252.0) * mean / sd;
}

double window_loss(const Eigen::VectorXd& w, const Eigen::MatrixXd& R,
                   double l1_penalty) {
  const Eigen::Index days = R.cols();
  std::vector<double> rp(static_cast<size_t>(days));
  for (Eigen::Index t = 0; t < days; ++t) rp[size_t(t)] = w.dot(R.col(t));
  double mean = 0.0;
  for (double r : rp) mean += r;
  mean /= double(days);
  double var = 0.0;
  for (double r : rp) var += (r - mean) * (r - mean);
  var /= double(days);
  const double sd = std::sqrt(var);
  if (mean > 0.0) return -std::log(mean) + std::log(sd) + l1_penalty;
  return -mean / sd + 1.0 + l1_penalty;
}

double mv_objective(const Eigen::MatrixXd& cov, const Eigen::VectorXd& means,
                    double lambda, const Eigen::VectorXd& w) {
  return means.dot(w) - lambda * w.dot(cov * w);
}

double kkt_residual(const Eigen::MatrixXd& cov, const Eigen::VectorXd& means,
                    double lambda, const Eigen::VectorXd& w) {
  const Eigen::VectorXd grad = means - 2.0 * lambda * (cov * w);
  double nu = 0.0;
  int active = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > 1e-12) {
      nu += grad[i];
      ++active;
    }
  }
  if (active == 0) return std::numeric_limits<double>::infinity();
  nu /= double(active);
  double res = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > 1e-12) {
      res = std::max(res, std::abs(grad[i] - nu));
    } else {
      res = std::max(res, std::max(0.0, grad[i] - nu));
    }
  }
  return res;
}

}  // namespace oracle
