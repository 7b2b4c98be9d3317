#include "graphfolio/dependency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "graphfolio/errors.hpp"
#include "graphfolio/text.hpp"
#include "graphfolio/threading.hpp"

namespace graphfolio {

namespace {

// Per-worker scratch for one pair: the two T x T distance matrices and their
// row means. Reused across pairs; never materialized for all pairs at once.
struct PairScratch {
  Eigen::MatrixXd A, B;
  Eigen::VectorXd ra, rb;
  std::vector<double> x, y;
};

// dcov(x,x), dcov(y,y) and dcov(x,y) in one sweep over the double-centered
// matrices. Fixed loop order: the sums are reproducible bit for bit.
void dcov_terms(const double* x, const double* y, int T, PairScratch& s,
                double& dxx, double& dyy, double& dxy) {
  s.A.resize(T, T);
  s.B.resize(T, T);
  s.ra.resize(T);
  s.rb.resize(T);
  for (int i = 0; i < T; ++i) {
    double sa = 0.0, sb = 0.0;
    for (int j = 0; j < T; ++j) {
      double a = std::fabs(x[i] - x[j]);
      double b = std::fabs(y[i] - y[j]);
      s.A(i, j) = a;
      s.B(i, j) = b;
      sa += a;
      sb += b;
    }
    s.ra(i) = sa / double(T);
    s.rb(i) = sb / double(T);
  }
  double ga = 0.0, gb = 0.0;
  for (int i = 0; i < T; ++i) {
    ga += s.ra(i);
    gb += s.rb(i);
  }
  ga /= double(T);
  gb /= double(T);

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < T; ++j) {
      double ap = s.A(i, j) - s.ra(i) - s.ra(j) + ga;
      double bp = s.B(i, j) - s.rb(i) - s.rb(j) + gb;
      sxx += ap * ap;
      syy += bp * bp;
      sxy += ap * bp;
    }
  }
  double t2 = double(T) * double(T);
  dxx = std::max(0.0, sxx / t2);
  dyy = std::max(0.0, syy / t2);
  dxy = std::max(0.0, sxy / t2);
}

double dcor_from_terms(double dxx, double dyy, double dxy) {
  if (dxx == 0.0 || dyy == 0.0) return 0.0;
  // Identical distance matrices accumulate identical sums; return 1 exactly
  // rather than losing an ulp to sqrt.
  if (dxy == dxx && dxy == dyy) return 1.0;
  double r = dxy / std::sqrt(dxx * dyy);
  return std::clamp(r, 0.0, 1.0);
}

void check_pair(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) {
    throw DataError("series length mismatch: " + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()));
  }
  if (a.size() < 2) throw DataError("need at least 2 paired observations");
}

}  // namespace

double distance_covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  check_pair(a, b);
  PairScratch s;
  double dxx, dyy, dxy;
  dcov_terms(a.data(), b.data(), int(a.size()), s, dxx, dyy, dxy);
  return dxy;
}

double distance_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  check_pair(a, b);
  PairScratch s;
  double dxx, dyy, dxy;
  dcov_terms(a.data(), b.data(), int(a.size()), s, dxx, dyy, dxy);
  return dcor_from_terms(dxx, dyy, dxy);
}

Eigen::MatrixXd pairwise_dcor(const Eigen::MatrixXd& rows, int min_overlap,
                              int n_threads) {
  long n = rows.rows();
  long cols = rows.cols();
  int gate = std::max(min_overlap, 2);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(size_t(n) * size_t(n + 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) pairs.emplace_back(i, j);

  int workers = resolve_threads(n_threads);
  parallel_chunks(pairs.size(), workers, [&](size_t begin, size_t end) {
    PairScratch s;
    for (size_t k = begin; k < end; ++k) {
      auto [i, j] = pairs[k];
      s.x.clear();
      s.y.clear();
      for (long c = 0; c < cols; ++c) {
        double xv = rows(i, c), yv = rows(j, c);
        if (std::isfinite(xv) && std::isfinite(yv)) {
          s.x.push_back(xv);
          s.y.push_back(yv);
        }
      }
      if (int(s.x.size()) < gate) continue;
      double dxx, dyy, dxy;
      dcov_terms(s.x.data(), s.y.data(), int(s.x.size()), s, dxx, dyy, dxy);
      double r = dcor_from_terms(dxx, dyy, dxy);
      out(i, j) = r;
      out(j, i) = r;
    }
  });
  return out;
}

DependencyMatrix pairwise_dependency_matrix(const VolPanel& vols,
                                            const UniverseSnapshot& snapshot,
                                            int min_overlap, int n_threads) {
  int pos = vols.calendar_pos(snapshot.as_of);
  if (pos < 0) {
    throw DataError("as_of " + format_date(snapshot.as_of) +
                    " is not in the volatility panel calendar");
  }
  long n = long(snapshot.firms.size());
  int T = snapshot.lookback_T;
  Eigen::MatrixXd rows(n, T);
  rows.setConstant(std::nan(""));
  for (long u = 0; u < n; ++u) {
    auto it = vols.firm_index.find(snapshot.firms[size_t(u)]);
    if (it == vols.firm_index.end()) {
      throw DataError("firm " + snapshot.firms[size_t(u)] +
                      " missing from the volatility panel");
    }
    const Series& v = vols.series[size_t(it->second)];
    for (int j = 0; j < T; ++j) {
      int p = pos - T + j;
      if (p >= 0 && v.covers(p)) rows(u, j) = v.at(p);
    }
  }

  DependencyMatrix dep;
  dep.as_of = snapshot.as_of;
  dep.firms = snapshot.firms;
  dep.min_overlap = min_overlap;
  dep.values = pairwise_dcor(rows, min_overlap, n_threads);
  return dep;
}

CovMatrix sample_covariance(const ReturnPanel& returns,
                            const UniverseSnapshot& snapshot) {
  int pos = returns.calendar_pos(snapshot.as_of);
  if (pos < 0) {
    throw DataError("as_of " + format_date(snapshot.as_of) +
                    " is not in the return panel calendar");
  }
  int window_begin = std::max(0, pos - snapshot.lookback_T);
  long n = long(snapshot.firms.size());

  // Window-clipped observation range per firm; series are contiguous, so a
  // pair's common dates form one interval.
  std::vector<int> lo(static_cast<size_t>(n)), hi(static_cast<size_t>(n));
  std::vector<const Series*> series(static_cast<size_t>(n));
  for (long u = 0; u < n; ++u) {
    auto it = returns.firm_index.find(snapshot.firms[size_t(u)]);
    if (it == returns.firm_index.end()) {
      throw DataError("firm " + snapshot.firms[size_t(u)] +
                      " missing from the return panel");
    }
    const Series& r = returns.series[size_t(it->second)];
    series[size_t(u)] = &r;
    lo[size_t(u)] = std::max(r.start, window_begin);
    hi[size_t(u)] = std::min(r.end(), pos);
    if (hi[size_t(u)] - lo[size_t(u)] < 2) {
      throw DataError("firm " + snapshot.firms[size_t(u)] +
                      " has fewer than 2 returns in the lookback window");
    }
  }

  CovMatrix cov;
  cov.as_of = snapshot.as_of;
  cov.firms = snapshot.firms;
  cov.values = Eigen::MatrixXd::Zero(n, n);
  cov.means.resize(n);

  for (long u = 0; u < n; ++u) {
    const Series& r = *series[size_t(u)];
    double mean = 0.0;
    int count = hi[size_t(u)] - lo[size_t(u)];
    for (int p = lo[size_t(u)]; p < hi[size_t(u)]; ++p) mean += r.at(p);
    mean /= double(count);
    cov.means(u) = mean;
  }

  for (long i = 0; i < n; ++i) {
    for (long j = i; j < n; ++j) {
      int begin = std::max(lo[size_t(i)], lo[size_t(j)]);
      int end = std::min(hi[size_t(i)], hi[size_t(j)]);
      int count = end - begin;
      if (count < 2) {
        cov.sparse_pairs.emplace_back(int(i), int(j));
        continue;
      }
      const Series& a = *series[size_t(i)];
      const Series& b = *series[size_t(j)];
      double ma = 0.0, mb = 0.0;
      for (int p = begin; p < end; ++p) {
        ma += a.at(p);
        mb += b.at(p);
      }
      ma /= double(count);
      mb /= double(count);
      double acc = 0.0;
      for (int p = begin; p < end; ++p) {
        acc += (a.at(p) - ma) * (b.at(p) - mb);
      }
      double c = acc / double(count);
      cov.values(i, j) = c;
      cov.values(j, i) = c;
    }
  }
  return cov;
}

void write_dependency_csv(const DependencyMatrix& dep, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dependency file '" + path + "'");
  out << "firm_id";
  for (const auto& f : dep.firms) out << ',' << f;
  out << '\n';
  long n = dep.values.rows();
  for (long i = 0; i < n; ++i) {
    out << dep.firms[size_t(i)];
    for (long j = 0; j < n; ++j) out << ',' << sig_digits(dep.values(i, j), 12);
    out << '\n';
  }
}

DependencyMatrix read_dependency_csv(const std::string& path, Date as_of) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dependency file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_view(line, ',');
  if (header.size() < 2 || header[0] != "firm_id") {
    throw DataError(path + ": expected 'firm_id,<firms...>' header");
  }

  DependencyMatrix dep;
  dep.as_of = as_of;
  for (size_t i = 1; i < header.size(); ++i) dep.firms.emplace_back(header[i]);
  long n = long(dep.firms.size());
  dep.values.resize(n, n);

  long row = 0;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row >= n) throw DataError(path + ": more rows than header firms");
    auto fields = split_view(line, ',');
    if (long(fields.size()) != n + 1) {
      throw DataError(path + ": line " + std::to_string(line_no) +
                      ": expected " + std::to_string(n + 1) + " fields");
    }
    if (fields[0] != dep.firms[size_t(row)]) {
      throw DataError(path + ": line " + std::to_string(line_no) +
                      ": row firm does not match header order");
    }
    for (long j = 0; j < n; ++j) {
      double v;
      if (!parse_double(fields[size_t(j) + 1], v)) {
        throw DataError(path + ": line " + std::to_string(line_no) +
                        ": unparseable value");
      }
      if (v < -1e-9 || v > 1.0 + 1e-9) {
        throw DataError(path + ": line " + std::to_string(line_no) +
                        ": dependency value outside [0, 1]");
      }
      dep.values(row, j) = std::clamp(v, 0.0, 1.0);
    }
    ++row;
  }
  if (row != n) throw DataError(path + ": fewer rows than header firms");
  if ((dep.values - dep.values.transpose()).cwiseAbs().maxCoeff() != 0.0) {
    throw DataError(path + ": matrix is not symmetric");
  }
  return dep;
}

}  // namespace graphfolio
