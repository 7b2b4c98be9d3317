#include "graphfolio/gatnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "graphfolio/errors.hpp"
#include "graphfolio/rng.hpp"

namespace graphfolio {

namespace {

constexpr double kNormEps = 1e-8;
constexpr double kAllocationEps = 1e-12;
// Keeps the non-positive-mean substitute loss above the healthy branch as the
// mean crosses zero, so early stopping never prefers a sick epoch.
constexpr double kSurrogateOffset = 1.0;

void check_shapes(const GatParams& p, const Eigen::MatrixXd& X,
                  const FilteredGraph& g) {
  const GatHyper& h = p.hyper;
  if (X.rows() != g.n()) {
    throw PipelineError("feature rows (" + std::to_string(X.rows()) +
                        ") do not match graph nodes (" + std::to_string(g.n()) +
                        ")");
  }
  if (int(X.cols()) != p.T) {
    throw PipelineError("feature length " + std::to_string(X.cols()) +
                        " does not match parameter shapes built for T=" +
                        std::to_string(p.T));
  }
  if (int(p.W.size()) != h.K || int(p.a.size()) != h.K) {
    throw PipelineError("parameter head count does not match K");
  }
  for (int k = 0; k < h.K; ++k) {
    if (p.W[size_t(k)].rows() != h.Tprime || p.W[size_t(k)].cols() != p.T ||
        p.a[size_t(k)].size() != 2 * h.Tprime) {
      throw PipelineError("head " + std::to_string(k) + " has inconsistent shapes");
    }
  }
  long kt = long(h.K) * h.Tprime;
  if (p.W1.rows() != h.d1 || p.W1.cols() != kt || p.b1.size() != h.d1 ||
      p.W2.rows() != 1 || p.W2.cols() != h.d1 || p.b2.size() != 1 ||
      p.norm_mean.size() != kt || p.norm_var.size() != kt) {
    throw PipelineError("dense block shapes are inconsistent");
  }
}

// Sorted neighbor lists with the node itself spliced in: attention always has
// at least the self edge to normalize over.
std::vector<std::vector<int>> neighborhoods(const FilteredGraph& g) {
  std::vector<std::vector<int>> nbh(static_cast<size_t>(g.n()));
  for (int u = 0; u < g.n(); ++u) {
    const auto& adj = g.adjacency[size_t(u)];
    auto& list = nbh[size_t(u)];
    list.reserve(adj.size() + 1);
    auto it = std::lower_bound(adj.begin(), adj.end(), u);
    list.insert(list.end(), adj.begin(), it);
    list.push_back(u);
    list.insert(list.end(), it, adj.end());
  }
  return nbh;
}

struct Cache {
  std::vector<std::vector<int>> nbh;
  std::vector<Eigen::MatrixXd> Z;  // K of n x T'
  // Raw pre-activation scores and normalized coefficients, [head][node][idx].
  std::vector<std::vector<std::vector<double>>> q;
  std::vector<std::vector<std::vector<double>>> alpha;
  std::vector<Eigen::MatrixXd> M;  // pre-ReLU aggregates, K of n x T'
  Eigen::MatrixXd H;               // n x K*T'
  Eigen::VectorXd bmean, bvar;     // batch stats (train mode)
  Eigen::VectorXd istd;            // 1/sqrt(var + eps) actually used
  Eigen::MatrixXd xhat;            // n x K*T'
  Eigen::MatrixXd P1, R1, Dp;      // n x d1
  Eigen::MatrixXd drop_scale;      // n x d1, keep/(1-p) multipliers
  Eigen::VectorXd P2, s2;          // n
};

Eigen::MatrixXd attention_heads(const GatParams& p, const Eigen::MatrixXd& X,
                                const FilteredGraph& g, Cache* cache) {
  const GatHyper& h = p.hyper;
  long n = X.rows();
  std::vector<std::vector<int>> local_nbh;
  const auto& nbh = cache ? (cache->nbh = neighborhoods(g))
                          : (local_nbh = neighborhoods(g));

  Eigen::MatrixXd H(n, long(h.K) * h.Tprime);
  if (cache) {
    cache->Z.resize(size_t(h.K));
    cache->M.resize(size_t(h.K));
    cache->q.assign(size_t(h.K), {});
    cache->alpha.assign(size_t(h.K), {});
  }
  std::vector<double> q, alpha;
  for (int k = 0; k < h.K; ++k) {
    Eigen::MatrixXd Z = X * p.W[size_t(k)].transpose();  // n x T'
    Eigen::VectorXd a1 = p.a[size_t(k)].head(h.Tprime);
    Eigen::VectorXd a2 = p.a[size_t(k)].tail(h.Tprime);
    Eigen::VectorXd s_src = Z * a1;
    Eigen::VectorXd s_dst = Z * a2;

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, h.Tprime);
    if (cache) {
      cache->q[size_t(k)].resize(size_t(n));
      cache->alpha[size_t(k)].resize(size_t(n));
    }
    for (long u = 0; u < n; ++u) {
      const auto& list = nbh[size_t(u)];
      q.resize(list.size());
      alpha.resize(list.size());
      double qmax = -std::numeric_limits<double>::infinity();
      for (size_t idx = 0; idx < list.size(); ++idx) {
        double raw = s_src(u) + s_dst(list[idx]);
        q[idx] = raw > 0.0 ? raw : h.leaky_slope * raw;
        qmax = std::max(qmax, q[idx]);
      }
      double denom = 0.0;
      for (size_t idx = 0; idx < list.size(); ++idx) {
        alpha[idx] = std::exp(q[idx] - qmax);
        denom += alpha[idx];
      }
      for (size_t idx = 0; idx < list.size(); ++idx) {
        alpha[idx] /= denom;
        M.row(u) += alpha[idx] * Z.row(list[idx]);
      }
      if (cache) {
        cache->q[size_t(k)][size_t(u)] = q;
        cache->alpha[size_t(k)][size_t(u)] = alpha;
      }
    }
    H.middleCols(long(k) * h.Tprime, h.Tprime) = M.cwiseMax(0.0);
    if (cache) {
      cache->Z[size_t(k)] = std::move(Z);
      cache->M[size_t(k)] = std::move(M);
    }
  }
  if (!H.allFinite()) throw PipelineError("non-finite attention activations");
  return H;
}

Eigen::VectorXd dense_blocks(const GatParams& p, const Eigen::MatrixXd& H,
                             Mode mode, uint64_t dropout_seed, Cache* cache) {
  const GatHyper& h = p.hyper;
  long n = H.rows();
  long kt = H.cols();

  Eigen::VectorXd mean, var;
  if (mode == Mode::train) {
    mean = H.colwise().mean();
    var = (H.rowwise() - mean.transpose())
              .array()
              .square()
              .colwise()
              .mean()
              .matrix();
  } else {
    mean = p.norm_mean;
    var = p.norm_var;
  }
  Eigen::VectorXd istd = (var.array() + kNormEps).sqrt().inverse().matrix();
  Eigen::MatrixXd xhat = ((H.rowwise() - mean.transpose()).array().rowwise() *
                          istd.transpose().array())
                             .matrix();

  Eigen::MatrixXd P1 = (xhat * p.W1.transpose()).rowwise() + p.b1.transpose();
  Eigen::MatrixXd R1 = P1.cwiseMax(0.0);

  Eigen::MatrixXd Dp;
  Eigen::MatrixXd drop_scale;
  if (mode == Mode::train && h.dropout > 0.0) {
    Rng rng(dropout_seed);
    drop_scale.resize(n, h.d1);
    double inv_keep = 1.0 / (1.0 - h.dropout);
    for (long r = 0; r < n; ++r) {
      for (long c = 0; c < h.d1; ++c) {
        drop_scale(r, c) = rng.uniform() >= h.dropout ? inv_keep : 0.0;
      }
    }
    Dp = R1.cwiseProduct(drop_scale);
  } else {
    drop_scale = Eigen::MatrixXd::Ones(n, h.d1);
    Dp = R1;
  }

  Eigen::VectorXd P2 = Dp * p.W2.transpose() + Eigen::VectorXd::Constant(n, p.b2(0));
  Eigen::VectorXd s2 = P2.cwiseMax(0.0);
  if (!s2.allFinite()) throw PipelineError("non-finite dense block activations");

  if (cache) {
    if (mode == Mode::train) {
      cache->bmean = mean;
      cache->bvar = var;
    }
    cache->istd = std::move(istd);
    cache->xhat = std::move(xhat);
    cache->P1 = std::move(P1);
    cache->R1 = std::move(R1);
    cache->Dp = std::move(Dp);
    cache->drop_scale = std::move(drop_scale);
    cache->P2 = P2;
    cache->s2 = s2;
  }
  (void)kt;
  return s2;
}

struct LossPieces {
  double loss = 0.0;
  bool surrogate = false;
  double mu = 0.0, sigma = 0.0;
  Eigen::VectorXd r_p;
};

LossPieces portfolio_loss(const Eigen::VectorXd& w, const Eigen::MatrixXd& R,
                          double l1_penalty) {
  if (R.rows() != w.size()) {
    throw PipelineError("return matrix rows do not match the weight vector");
  }
  long days = R.cols();
  if (days < 2) throw DataError("loss window needs at least 2 days");

  LossPieces out;
  out.r_p = R.transpose() * w;
  out.mu = out.r_p.mean();
  out.sigma = std::sqrt((out.r_p.array() - out.mu).square().mean());
  if (out.sigma == 0.0) {
    throw PipelineError("degenerate constant portfolio return in loss window");
  }
  if (out.mu > 0.0) {
    out.loss = -std::log(out.mu) + std::log(out.sigma) + l1_penalty;
  } else {
    out.loss = -out.mu / out.sigma + kSurrogateOffset + l1_penalty;
    out.surrogate = true;
  }
  return out;
}

}  // namespace

GatParams gat_init(const GatHyper& hyper, int T, uint64_t seed) {
  if (hyper.K < 1 || hyper.Tprime < 1 || hyper.d1 < 1 || T < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (hyper.dropout < 0.0 || hyper.dropout >= 1.0) {
    throw ConfigError("dropout must be in [0, 1)");
  }
  if (hyper.l1 < 0.0) throw ConfigError("l1 coefficient must be >= 0");

  Rng rng(seed);
  auto glorot = [&](long rows, long cols, long fan_in, long fan_out) {
    double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
    }
    return m;
  };

  GatParams p;
  p.hyper = hyper;
  p.T = T;
  long kt = long(hyper.K) * hyper.Tprime;
  for (int k = 0; k < hyper.K; ++k) {
    p.W.push_back(glorot(hyper.Tprime, T, T, hyper.Tprime));
    p.a.push_back(glorot(2 * hyper.Tprime, 1, 2 * hyper.Tprime, 1).col(0));
  }
  p.W1 = glorot(hyper.d1, kt, kt, hyper.d1);
  p.b1 = Eigen::VectorXd::Zero(hyper.d1);
  p.W2 = glorot(1, hyper.d1, hyper.d1, 1);
  p.b2 = Eigen::VectorXd::Zero(1);
  p.norm_mean = Eigen::VectorXd::Zero(kt);
  p.norm_var = Eigen::VectorXd::Ones(kt);
  return p;
}

Eigen::MatrixXd gat_forward(const GatParams& params, const Eigen::MatrixXd& X,
                            const FilteredGraph& g, Mode mode) {
  (void)mode;  // the attention layer has no train-only behavior
  check_shapes(params, X, g);
  return attention_heads(params, X, g, nullptr);
}

std::vector<std::vector<double>> attention_coefficients(
    const GatParams& params, int head, const Eigen::MatrixXd& X,
    const FilteredGraph& g) {
  check_shapes(params, X, g);
  if (head < 0 || head >= params.hyper.K) throw ConfigError("head out of range");
  Cache cache;
  attention_heads(params, X, g, &cache);
  return cache.alpha[size_t(head)];
}

Eigen::VectorXd dense_blocks_forward(const GatParams& params,
                                     const Eigen::MatrixXd& H, Mode mode,
                                     uint64_t dropout_seed) {
  long kt = long(params.hyper.K) * params.hyper.Tprime;
  if (H.cols() != kt) {
    throw PipelineError("dense block input width " + std::to_string(H.cols()) +
                        " does not match K*T' = " + std::to_string(kt));
  }
  return dense_blocks(params, H, mode, dropout_seed, nullptr);
}

PortfolioWeights allocation_layer(const Eigen::VectorXd& s2) {
  long n = s2.size();
  if (n == 0) throw DataError("empty score vector");
  for (long i = 0; i < n; ++i) {
    if (!(s2(i) >= 0.0)) {
      throw PipelineError("allocation scores must be non-negative, got " +
                          std::to_string(s2(i)) + " at " + std::to_string(i));
    }
  }
  PortfolioWeights out;
  double total = s2.sum();
  if (total < kAllocationEps) {
    out.weights = Eigen::VectorXd::Constant(n, 1.0 / double(n));
    out.fallback_equal = true;
  } else {
    out.weights = s2 / total;
  }
  return out;
}

double sharpe_loss(const Eigen::VectorXd& w,
                   const Eigen::MatrixXd& window_returns, double l1_penalty,
                   bool* surrogate) {
  LossPieces pieces = portfolio_loss(w, window_returns, l1_penalty);
  if (surrogate) *surrogate = pieces.surrogate;
  return pieces.loss;
}

LossResult gat_loss(const GatParams& params, const Eigen::MatrixXd& X,
                    const FilteredGraph& g, const Eigen::MatrixXd& R, Mode mode,
                    uint64_t dropout_seed, bool include_l1) {
  check_shapes(params, X, g);
  Cache cache;
  Eigen::MatrixXd H = attention_heads(params, X, g, &cache);
  Eigen::VectorXd s2 = dense_blocks(params, H, mode, dropout_seed, &cache);
  PortfolioWeights w = allocation_layer(s2);
  double l1 = include_l1 ? params.hyper.l1 * params.W2.cwiseAbs().sum() : 0.0;
  LossPieces pieces = portfolio_loss(w.weights, R, l1);

  LossResult out;
  out.loss = pieces.loss;
  out.weights = w.weights;
  out.fallback_equal = w.fallback_equal;
  out.surrogate = pieces.surrogate;
  if (mode == Mode::train) {
    out.batch_mean = cache.bmean;
    out.batch_var = cache.bvar;
  }
  return out;
}

LossResult gat_backward(const GatParams& params, const Eigen::MatrixXd& X,
                        const FilteredGraph& g, const Eigen::MatrixXd& R,
                        uint64_t dropout_seed, GatGrads& grads) {
  check_shapes(params, X, g);
  const GatHyper& h = params.hyper;
  long n = X.rows();
  long days = R.cols();

  Cache cache;
  Eigen::MatrixXd H = attention_heads(params, X, g, &cache);
  cache.H = H;
  Eigen::VectorXd s2 = dense_blocks(params, H, Mode::train, dropout_seed, &cache);
  PortfolioWeights alloc = allocation_layer(s2);
  double l1 = h.l1 * params.W2.cwiseAbs().sum();
  LossPieces pieces = portfolio_loss(alloc.weights, R, l1);

  // Loss head: d(loss)/d(mu), d(loss)/d(sigma).
  double dmu, dsigma;
  if (!pieces.surrogate) {
    dmu = -1.0 / pieces.mu;
    dsigma = 1.0 / pieces.sigma;
  } else {
    dmu = -1.0 / pieces.sigma;
    dsigma = pieces.mu / (pieces.sigma * pieces.sigma);
  }
  Eigen::VectorXd dr_p(days);
  double inv_days = 1.0 / double(days);
  for (long t = 0; t < days; ++t) {
    dr_p(t) = dmu * inv_days +
              dsigma * (pieces.r_p(t) - pieces.mu) * inv_days / pieces.sigma;
  }
  Eigen::VectorXd dw = R * dr_p;

  // Allocation: w_i = s_i / S, so ds_j = (dw_j - sum_i dw_i w_i) / S. The
  // equal-weight fallback is constant in s, so nothing flows back through it.
  Eigen::VectorXd ds = Eigen::VectorXd::Zero(n);
  if (!alloc.fallback_equal) {
    double total = s2.sum();
    double mixed = dw.dot(alloc.weights);
    ds = (dw.array() - mixed).matrix() / total;
  }

  Eigen::VectorXd dP2 =
      (cache.P2.array() > 0.0).select(ds.array(), 0.0).matrix();
  grads.W2 = dP2.transpose() * cache.Dp;
  grads.W2 += h.l1 * params.W2.unaryExpr([](double v) {
    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  });
  grads.b2 = Eigen::VectorXd::Constant(1, dP2.sum());

  Eigen::MatrixXd dDp = dP2 * params.W2;  // n x d1
  Eigen::MatrixXd dR1 = dDp.cwiseProduct(cache.drop_scale);
  Eigen::MatrixXd dP1 =
      (cache.P1.array() > 0.0).select(dR1.array(), 0.0).matrix();
  grads.W1 = dP1.transpose() * cache.xhat;
  grads.b1 = dP1.colwise().sum();

  Eigen::MatrixXd dxhat = dP1 * params.W1;  // n x K*T'

  // Batch norm backward with batch statistics:
  // dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat)).
  Eigen::MatrixXd dH(n, dxhat.cols());
  for (long c = 0; c < dxhat.cols(); ++c) {
    double mean_d = dxhat.col(c).mean();
    double mean_dx = dxhat.col(c).cwiseProduct(cache.xhat.col(c)).mean();
    dH.col(c) = cache.istd(c) *
                (dxhat.col(c).array() - mean_d -
                 cache.xhat.col(c).array() * mean_dx)
                    .matrix();
  }

  grads.W.assign(size_t(h.K), Eigen::MatrixXd());
  grads.a.assign(size_t(h.K), Eigen::VectorXd());
  for (int k = 0; k < h.K; ++k) {
    const Eigen::MatrixXd& Z = cache.Z[size_t(k)];
    Eigen::VectorXd a1 = params.a[size_t(k)].head(h.Tprime);
    Eigen::VectorXd a2 = params.a[size_t(k)].tail(h.Tprime);

    Eigen::MatrixXd dHk = dH.middleCols(long(k) * h.Tprime, h.Tprime);
    Eigen::MatrixXd dM =
        (cache.M[size_t(k)].array() > 0.0).select(dHk.array(), 0.0).matrix();

    Eigen::MatrixXd dZ = Eigen::MatrixXd::Zero(n, h.Tprime);
    Eigen::VectorXd da1 = Eigen::VectorXd::Zero(h.Tprime);
    Eigen::VectorXd da2 = Eigen::VectorXd::Zero(h.Tprime);
    std::vector<double> dalpha;
    for (long u = 0; u < n; ++u) {
      const auto& list = cache.nbh[size_t(u)];
      const auto& alpha = cache.alpha[size_t(k)][size_t(u)];
      const auto& q = cache.q[size_t(k)][size_t(u)];
      dalpha.resize(list.size());
      double mixed = 0.0;
      for (size_t idx = 0; idx < list.size(); ++idx) {
        dalpha[idx] = Z.row(list[idx]).dot(dM.row(u));
        mixed += alpha[idx] * dalpha[idx];
        dZ.row(list[idx]) += alpha[idx] * dM.row(u);
      }
      for (size_t idx = 0; idx < list.size(); ++idx) {
        double de = alpha[idx] * (dalpha[idx] - mixed);
        double dq = de * (q[idx] > 0.0 ? 1.0 : h.leaky_slope);
        da1 += dq * Z.row(u).transpose();
        da2 += dq * Z.row(list[idx]).transpose();
        dZ.row(u) += dq * a1.transpose();
        dZ.row(list[idx]) += dq * a2.transpose();
      }
    }
    grads.W[size_t(k)] = dZ.transpose() * X;
    Eigen::VectorXd da(2 * h.Tprime);
    da << da1, da2;
    grads.a[size_t(k)] = da;
  }

  auto finite = [](const Eigen::MatrixXd& m) { return m.allFinite(); };
  for (int k = 0; k < h.K; ++k) {
    if (!finite(grads.W[size_t(k)]) || !grads.a[size_t(k)].allFinite()) {
      throw PipelineError("non-finite gradient in attention head " +
                          std::to_string(k));
    }
  }
  if (!finite(grads.W1) || !grads.b1.allFinite())
    throw PipelineError("non-finite gradient in dense block 1");
  if (!finite(grads.W2) || !grads.b2.allFinite())
    throw PipelineError("non-finite gradient in dense block 2");

  LossResult out;
  out.loss = pieces.loss;
  out.weights = alloc.weights;
  out.fallback_equal = alloc.fallback_equal;
  out.surrogate = pieces.surrogate;
  out.batch_mean = cache.bmean;
  out.batch_var = cache.bvar;
  return out;
}

namespace {

void adam_update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                 Eigen::MatrixXd& m, Eigen::MatrixXd& v, double lr, double b1,
                 double b2, double eps, double bc1, double bc2) {
  m = b1 * m + (1.0 - b1) * grad;
  v = (b2 * v).array() + (1.0 - b2) * grad.array().square();
  Eigen::ArrayXXd mhat = m.array() / bc1;
  Eigen::ArrayXXd vhat = v.array() / bc2;
  param.array() -= lr * mhat / (vhat.sqrt() + eps);
}

void adam_update(Eigen::VectorXd& param, const Eigen::VectorXd& grad,
                 Eigen::VectorXd& m, Eigen::VectorXd& v, double lr, double b1,
                 double b2, double eps, double bc1, double bc2) {
  m = b1 * m + (1.0 - b1) * grad;
  v = (b2 * v).array() + (1.0 - b2) * grad.array().square();
  Eigen::ArrayXd mhat = m.array() / bc1;
  Eigen::ArrayXd vhat = v.array() / bc2;
  param.array() -= lr * mhat / (vhat.sqrt() + eps);
}

GatGrads zero_like(const GatParams& p) {
  GatGrads g;
  for (const auto& w : p.W) g.W.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& a : p.a) g.a.push_back(Eigen::VectorXd::Zero(a.size()));
  g.W1 = Eigen::MatrixXd::Zero(p.W1.rows(), p.W1.cols());
  g.b1 = Eigen::VectorXd::Zero(p.b1.size());
  g.W2 = Eigen::MatrixXd::Zero(p.W2.rows(), p.W2.cols());
  g.b2 = Eigen::VectorXd::Zero(p.b2.size());
  return g;
}

}  // namespace

TrainResult train_gat(const GatParams& init, const Eigen::MatrixXd& X,
                      const FilteredGraph& g, const Eigen::MatrixXd& R_train,
                      const Eigen::MatrixXd& R_val, const TrainConfig& config) {
  if (config.patience < 1) throw ConfigError("patience must be >= 1");
  if (config.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(config.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");

  TrainState state;
  state.params = init;
  state.m = zero_like(init);
  state.v = zero_like(init);
  state.best_val_loss = std::numeric_limits<double>::infinity();

  TrainResult result;
  result.params = init;
  result.best_val_loss = state.best_val_loss;

  Rng epoch_seeds(config.seed);
  const GatHyper& h = init.hyper;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    state.epoch = epoch;
    uint64_t dropout_seed = epoch_seeds.next_u64();

    GatGrads grads;
    LossResult train_loss =
        gat_backward(state.params, X, g, R_train, dropout_seed, grads);
    if (!std::isfinite(train_loss.loss)) {
      throw PipelineError("training diverged at epoch " + std::to_string(epoch));
    }
    result.train_history.push_back(train_loss.loss);
    if (train_loss.surrogate) ++result.surrogate_epochs;

    double bc1 = 1.0 - std::pow(config.beta1, epoch);
    double bc2 = 1.0 - std::pow(config.beta2, epoch);
    for (int k = 0; k < h.K; ++k) {
      adam_update(state.params.W[size_t(k)], grads.W[size_t(k)],
                  state.m.W[size_t(k)], state.v.W[size_t(k)], config.lr,
                  config.beta1, config.beta2, config.eps, bc1, bc2);
      adam_update(state.params.a[size_t(k)], grads.a[size_t(k)],
                  state.m.a[size_t(k)], state.v.a[size_t(k)], config.lr,
                  config.beta1, config.beta2, config.eps, bc1, bc2);
    }
    adam_update(state.params.W1, grads.W1, state.m.W1, state.v.W1, config.lr,
                config.beta1, config.beta2, config.eps, bc1, bc2);
    adam_update(state.params.b1, grads.b1, state.m.b1, state.v.b1, config.lr,
                config.beta1, config.beta2, config.eps, bc1, bc2);
    adam_update(state.params.W2, grads.W2, state.m.W2, state.v.W2, config.lr,
                config.beta1, config.beta2, config.eps, bc1, bc2);
    adam_update(state.params.b2, grads.b2, state.m.b2, state.v.b2, config.lr,
                config.beta1, config.beta2, config.eps, bc1, bc2);

    // Momentum-0.9 running stats from this epoch's batch statistics.
    state.params.norm_mean =
        0.9 * state.params.norm_mean + 0.1 * train_loss.batch_mean;
    state.params.norm_var =
        0.9 * state.params.norm_var + 0.1 * train_loss.batch_var;

    // Validation in infer mode, data loss only.
    LossResult val =
        gat_loss(state.params, X, g, R_val, Mode::infer, 0, false);
    if (!std::isfinite(val.loss)) {
      throw PipelineError("validation loss diverged at epoch " +
                          std::to_string(epoch));
    }
    result.val_history.push_back(val.loss);
    result.epochs_run = epoch;

    if (val.loss < state.best_val_loss) {
      state.best_val_loss = val.loss;
      state.patience = 0;
      result.params = state.params;
      result.best_epoch = epoch;
      result.best_val_loss = val.loss;
    } else {
      ++state.patience;
      if (state.patience >= config.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'G', 'A', 'T', 'N', 'E', 'T', '1', '\0'};

void write_block(std::ofstream& out, const double* data, size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            std::streamsize(count * sizeof(double)));
}

void read_block(std::ifstream& in, double* data, size_t count,
                const std::string& path) {
  in.read(reinterpret_cast<char*>(data), std::streamsize(count * sizeof(double)));
  if (!in) throw DataError(path + ": truncated checkpoint");
}

}  // namespace

void save_checkpoint(const GatParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  int32_t dims[4] = {int32_t(params.hyper.K), int32_t(params.hyper.Tprime),
                     int32_t(params.hyper.d1), int32_t(params.T)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  double knobs[3] = {params.hyper.dropout, params.hyper.l1,
                     params.hyper.leaky_slope};
  out.write(reinterpret_cast<const char*>(knobs), sizeof(knobs));
  for (const auto& W : params.W) write_block(out, W.data(), size_t(W.size()));
  for (const auto& a : params.a) write_block(out, a.data(), size_t(a.size()));
  write_block(out, params.W1.data(), size_t(params.W1.size()));
  write_block(out, params.b1.data(), size_t(params.b1.size()));
  write_block(out, params.W2.data(), size_t(params.W2.size()));
  write_block(out, params.b2.data(), size_t(params.b2.size()));
  write_block(out, params.norm_mean.data(), size_t(params.norm_mean.size()));
  write_block(out, params.norm_var.data(), size_t(params.norm_var.size()));
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

GatParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path + ": not a GATNET1 checkpoint");
  }
  int32_t dims[4];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  double knobs[3];
  in.read(reinterpret_cast<char*>(knobs), sizeof(knobs));
  if (!in) throw DataError(path + ": truncated checkpoint header");
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1 || dims[3] < 1) {
    throw DataError(path + ": invalid checkpoint dimensions");
  }

  GatParams p;
  p.hyper.K = dims[0];
  p.hyper.Tprime = dims[1];
  p.hyper.d1 = dims[2];
  p.T = dims[3];
  p.hyper.dropout = knobs[0];
  p.hyper.l1 = knobs[1];
  p.hyper.leaky_slope = knobs[2];

  long kt = long(p.hyper.K) * p.hyper.Tprime;
  for (int k = 0; k < p.hyper.K; ++k) {
    Eigen::MatrixXd W(p.hyper.Tprime, p.T);
    read_block(in, W.data(), size_t(W.size()), path);
    p.W.push_back(std::move(W));
  }
  for (int k = 0; k < p.hyper.K; ++k) {
    Eigen::VectorXd a(2 * p.hyper.Tprime);
    read_block(in, a.data(), size_t(a.size()), path);
    p.a.push_back(std::move(a));
  }
  p.W1.resize(p.hyper.d1, kt);
  read_block(in, p.W1.data(), size_t(p.W1.size()), path);
  p.b1.resize(p.hyper.d1);
  read_block(in, p.b1.data(), size_t(p.b1.size()), path);
  p.W2.resize(1, p.hyper.d1);
  read_block(in, p.W2.data(), size_t(p.W2.size()), path);
  p.b2.resize(1);
  read_block(in, p.b2.data(), size_t(p.b2.size()), path);
  p.norm_mean.resize(kt);
  read_block(in, p.norm_mean.data(), size_t(p.norm_mean.size()), path);
  p.norm_var.resize(kt);
  read_block(in, p.norm_var.data(), size_t(p.norm_var.size()), path);
  return p;
}

}  // namespace graphfolio
