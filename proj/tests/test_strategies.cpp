#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "graphfolio/errors.hpp"
#include "graphfolio/rng.hpp"
#include "graphfolio/strategies.hpp"
#include "oracles.hpp"

using namespace graphfolio;

namespace {

UniverseSnapshot snapshot_of(int n) {
  UniverseSnapshot snap;
  snap.as_of = 16436;
  snap.firms.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) snap.firms[size_t(i)] = "F" + std::to_string(i);
  return snap;
}

CovMatrix cov_of(const Eigen::MatrixXd& values, const Eigen::VectorXd& means) {
  CovMatrix c;
  c.as_of = 16436;
  c.firms.resize(static_cast<size_t>(values.rows()));
  for (long i = 0; i < values.rows(); ++i) {
    c.firms[size_t(i)] = "F" + std::to_string(i);
  }
  c.values = values;
  c.means = means;
  return c;
}

}  // namespace

TEST_SUITE("strategies") {
  TEST_CASE("names round trip, parser accepts the cli aliases") {
    for (auto k : {StrategyKind::equal, StrategyKind::network_index,
                   StrategyKind::mean_variance, StrategyKind::gat}) {
      CHECK(strategy_from_name(strategy_name(k)) == k);
    }
    CHECK_THROWS_AS(strategy_from_name("nope"), ConfigError);

    auto specs = parse_strategy_list(" equal, network ,mv,gat ", 2.5, "ck.bin");
    REQUIRE(specs.size() == 4);
    CHECK(specs[0].kind == StrategyKind::equal);
    CHECK(specs[1].kind == StrategyKind::network_index);
    CHECK(specs[2].kind == StrategyKind::mean_variance);
    CHECK(specs[2].lambda_risk == 2.5);
    CHECK(specs[3].kind == StrategyKind::gat);
    CHECK(specs[3].checkpoint_path == "ck.bin");
    CHECK_THROWS_AS(parse_strategy_list("", 1.0, ""), ConfigError);
    CHECK_THROWS_AS(parse_strategy_list("equal,bogus", 1.0, ""), ConfigError);

    StrategySpec bad;
    bad.kind = StrategyKind::equal;
    bad.checkpoint_path = "x.bin";
    CHECK_THROWS_AS(validate(bad), ConfigError);
    StrategySpec mv;
    mv.kind = StrategyKind::mean_variance;
    mv.lambda_risk = 0.0;
    CHECK_THROWS_AS(validate(mv), ConfigError);
  }

  TEST_CASE("equal weights") {
    PortfolioWeights w = equal_weight(snapshot_of(8));
    CHECK(w.weights.size() == 8);
    CHECK((w.weights.array() == 0.125).all());
    CHECK_FALSE(w.fallback_equal);
    UniverseSnapshot empty = snapshot_of(0);
    CHECK_THROWS_AS(equal_weight(empty), DataError);
  }

  TEST_CASE("network index inverts peripherality") {
    CentralityScores s;
    s.peripherality.resize(3);
    s.peripherality << 0.5, 1.0, 0.25;
    s.degree = s.betweenness = s.closeness = Eigen::VectorXd::Zero(3);
    PortfolioWeights w = network_index_weights(s, snapshot_of(3));
    // Inverses 2, 1, 4 normalize to 2/7, 1/7, 4/7.
    CHECK(w.weights(0) == doctest::Approx(2.0 / 7.0).epsilon(1e-15));
    CHECK(w.weights(1) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
    CHECK(w.weights(2) == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
    CHECK_FALSE(w.guarded);
    CHECK(w.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("network index guards non-positive scores") {
    CentralityScores s;
    s.peripherality.resize(3);
    s.peripherality << 0.5, 0.0, 1.0;
    s.degree = s.betweenness = s.closeness = Eigen::VectorXd::Zero(3);
    PortfolioWeights w = network_index_weights(s, snapshot_of(3));
    CHECK(w.guarded);
    // The zero entry is patched to the smallest positive score (0.5).
    CHECK(w.weights(0) == w.weights(1));
    CHECK(w.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));

    CentralityScores dead;
    dead.peripherality = Eigen::VectorXd::Zero(3);
    dead.degree = dead.betweenness = dead.closeness = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(network_index_weights(dead, snapshot_of(3)), PipelineError);
  }

  TEST_CASE("simplex projection: sums, box, and fixed points") {
    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
      int n = 2 + int(rng.uniform_int(0, 8));
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) v[i] = rng.uniform(-2.0, 2.0);
      Eigen::VectorXd w = project_to_simplex(v);
      CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK((w.array() >= 0.0).all());
      // Projection is idempotent.
      Eigen::VectorXd w2 = project_to_simplex(w);
      CHECK(((w - w2).array().abs() < 1e-12).all());
    }
    // A point already on the simplex maps to itself.
    Eigen::VectorXd on(3);
    on << 0.2, 0.3, 0.5;
    CHECK(((project_to_simplex(on) - on).array().abs() < 1e-15).all());
  }

  TEST_CASE("mean-variance recovers the diagonal closed form") {
    // Equal means make the objective pure risk: w* is inverse-variance.
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, 0.0, 0.0, 4.0;
    Eigen::VectorXd means = Eigen::VectorXd::Constant(2, 0.1);
    PortfolioWeights w = mean_variance_weights(cov_of(cov, means), 1.0);
    CHECK(std::abs(w.weights(0) - 0.8) < 1e-6);
    CHECK(std::abs(w.weights(1) - 0.2) < 1e-6);
  }

  TEST_CASE("mean-variance beats a fine grid on 3 assets") {
    Rng rng(19);
    Eigen::MatrixXd A(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) A(i, j) = rng.normal();
    }
    Eigen::MatrixXd cov =
        A * A.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd means(3);
    means << 0.02, 0.05, 0.04;
    const double lambda = 0.7;
    PortfolioWeights w = mean_variance_weights(cov_of(cov, means), lambda);
    const double got = oracle::mv_objective(cov, means, lambda, w.weights);
    double best_grid = -1e18;
    const int G = 120;
    for (int i = 0; i <= G; ++i) {
      for (int j = 0; i + j <= G; ++j) {
        Eigen::VectorXd cand(3);
        cand << double(i) / G, double(j) / G, double(G - i - j) / G;
        best_grid =
            std::max(best_grid, oracle::mv_objective(cov, means, lambda, cand));
      }
    }
    CHECK(got >= best_grid - 1e-6);
    CHECK(oracle::kkt_residual(cov, means, lambda, w.weights) < 1e-6);
  }

  TEST_CASE("mean-variance stationarity on random instances") {
    Rng rng(23);
    for (int rep = 0; rep < 10; ++rep) {
      const int n = 6;
      Eigen::MatrixXd A(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) A(i, j) = rng.normal();
      }
      Eigen::MatrixXd cov =
          (A * A.transpose() / double(n) +
           0.05 * Eigen::MatrixXd::Identity(n, n)) *
          1e-4;
      Eigen::VectorXd means(n);
      for (int i = 0; i < n; ++i) means[i] = 1e-4 * rng.normal();
      PortfolioWeights w = mean_variance_weights(cov_of(cov, means), 2.0);
      CHECK(oracle::kkt_residual(cov, means, 2.0, w.weights) < 1e-6);
      CHECK(w.weights.sum() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK((w.weights.array() >= 0.0).all());
    }
  }

  TEST_CASE("mean-variance input validation") {
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.2, 0.3, 1.0;
    Eigen::VectorXd means = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(mean_variance_weights(cov_of(asym, means), 1.0), DataError);
    Eigen::MatrixXd ok = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(mean_variance_weights(cov_of(ok, means), 0.0), ConfigError);
  }

  TEST_CASE("weights csv has the documented schema") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "gf_strat_test";
    fs::create_directories(dir);
    fs::path file = dir / "weights.csv";

    PortfolioWeights w = equal_weight(snapshot_of(2));
    std::vector<LabeledWeights> rows;
    rows.push_back({w, "equal"});
    write_weights_csv(rows, file.string());
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    CHECK(line == "as_of,firm_id,weight,strategy");
    std::getline(in, line);
    CHECK(line == "2015-01-01,F0,0.5,equal");
    fs::remove_all(dir);
  }
}
