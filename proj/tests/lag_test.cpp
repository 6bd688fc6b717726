#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "voxelhop/errors.hpp"
#include "voxelhop/lag.hpp"
#include "voxelhop/rng.hpp"

using namespace voxelhop;

namespace {

// Two well-separated Gaussian blobs per class in 2D.
void make_blobs(Eigen::MatrixXd& features, std::vector<int>& labels, int per_class, std::uint64_t seed) {
  Rng rng(seed);
  features.resize(2 * per_class, 2);
  labels.assign(2 * static_cast<std::size_t>(per_class), 0);
  for (int j = 0; j < 2 * per_class; ++j) {
    const int cls = j < per_class ? 0 : 1;
    labels[static_cast<std::size_t>(j)] = cls;
    const double cx = cls == 0 ? -4.0 : 4.0;
    features(j, 0) = cx + rng.normal();
    features(j, 1) = rng.normal();
  }
}

}  // namespace

TEST_SUITE_BEGIN("lag");

TEST_CASE("soft association limits") {
  Eigen::VectorXd x = Eigen::Vector2d(0.0, 0.0);
  Eigen::MatrixXd centers(2, 2);
  centers.row(0) << 0.0, 0.0;     // distance 0
  centers.row(1) << 1000.0, 0.0;  // effectively infinite
  const Eigen::VectorXd p = soft_assoc(x, centers, 1.0);
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("equal distances give the uniform distribution") {
  Eigen::VectorXd x = Eigen::Vector2d(0.0, 0.0);
  Eigen::MatrixXd centers(3, 2);
  centers.row(0) << 2.0, 0.0;
  centers.row(1) << -2.0, 0.0;
  centers.row(2) << 0.0, 2.0;
  const Eigen::VectorXd p = soft_assoc(x, centers, 10.0);
  for (int l = 0; l < 3; ++l) CHECK(p[l] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("distances (1, 2) at omega 10 match the scalar formula") {
  Eigen::VectorXd x = Eigen::Vector2d(0.0, 0.0);
  Eigen::MatrixXd centers(2, 2);
  centers.row(0) << 1.0, 0.0;
  centers.row(1) << 2.0, 0.0;
  const Eigen::VectorXd p = soft_assoc(x, centers, 10.0);
  const double e10 = std::exp(-10.0), e20 = std::exp(-20.0);
  CHECK(p[0] == doctest::Approx(e10 / (e10 + e20)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(e20 / (e10 + e20)).epsilon(1e-12));
}

TEST_CASE("translation leaves soft associations unchanged") {
  Rng rng(9);
  Eigen::VectorXd x(3), t(3);
  Eigen::MatrixXd centers(4, 3);
  for (int i = 0; i < 3; ++i) {
    x[i] = rng.normal();
    t[i] = rng.normal();
  }
  for (int l = 0; l < 4; ++l) {
    for (int i = 0; i < 3; ++i) centers(l, i) = rng.normal();
  }
  const Eigen::VectorXd p = soft_assoc(x, centers, 3.0);
  const Eigen::VectorXd q = soft_assoc((x + t).eval(), (centers.rowwise() + t.transpose()).eval(), 3.0);
  for (int l = 0; l < 4; ++l) CHECK(p[l] == doctest::Approx(q[l]).epsilon(1e-12));
}

TEST_CASE("larger omega sharpens the association") {
  Eigen::VectorXd x = Eigen::Vector2d(0.0, 0.0);
  Eigen::MatrixXd centers(2, 2);
  centers.row(0) << 1.0, 0.0;
  centers.row(1) << 2.0, 0.0;
  double prev = 0.0;
  for (double omega : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
    const double p0 = soft_assoc(x, centers, omega)[0];
    CHECK(p0 >= prev);
    prev = p0;
  }
}

TEST_CASE("omega must be positive") {
  Eigen::VectorXd x = Eigen::Vector2d(0.0, 0.0);
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS((void)soft_assoc(x, centers, 0.0), ConfigError);
  Eigen::MatrixXd features = oracle::random_matrix(8, 2, 3);
  std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
  CHECK_THROWS_AS((void)fit_lag(features, labels, 2, -1.0, 1), ConfigError);
}

TEST_CASE("L=1 targets are the scalar one for the own class") {
  Eigen::MatrixXd features = oracle::random_matrix(8, 3, 21);
  std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1};
  const LagUnit unit = fit_lag(features, labels, 1, 10.0, 7);
  for (int j = 0; j < 8; ++j) {
    const Eigen::VectorXd t = prob_target(unit, features.row(j).transpose(), labels[static_cast<std::size_t>(j)]);
    REQUIRE(t.size() == 2);
    CHECK(t[labels[static_cast<std::size_t>(j)]] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t[1 - labels[static_cast<std::size_t>(j)]] == 0.0);
  }
}

TEST_CASE("a sample equidistant from two centers splits its block evenly") {
  LagUnit unit;
  unit.M = 2;
  unit.L = 2;
  unit.n = 2;
  unit.omega = 10.0;
  unit.centers.resize(4, 2);
  unit.centers.row(0) << -1.0, 0.0;  // class 0
  unit.centers.row(1) << 1.0, 0.0;
  unit.centers.row(2) << 0.0, 5.0;  // class 1
  unit.centers.row(3) << 0.0, 7.0;
  const Eigen::VectorXd t = prob_target(unit, Eigen::Vector2d(0.0, 0.0), 0);
  CHECK(t[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t[2] == 0.0);
  CHECK(t[3] == 0.0);
}

TEST_CASE("probability targets satisfy the block invariants on training data") {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  make_blobs(features, labels, 12, 99);
  const LagUnit unit = fit_lag(features, labels, 3, 10.0, 42);
  for (Eigen::Index j = 0; j < features.rows(); ++j) {
    const int cls = labels[static_cast<std::size_t>(j)];
    const Eigen::VectorXd t = prob_target(unit, features.row(j).transpose(), cls);
    double own = 0.0;
    for (int i = 0; i < 6; ++i) {
      if (i / 3 == cls) {
        CHECK(t[i] > 0.0);
        own += t[i];
      } else {
        CHECK(t[i] == 0.0);
      }
    }
    CHECK(own == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("k-means matches the from-scratch reference") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const int J = 12 + static_cast<int>(rng.index(30));
    const int dims = 2 + static_cast<int>(rng.index(4));
    const int k = 2 + static_cast<int>(rng.index(3));
    const Eigen::MatrixXd points = oracle::random_matrix(J, dims, 7000 + trial);
    const std::uint64_t seed = 5000 + trial;
    const KmeansResult mine = kmeans(points, k, seed);
    const Eigen::MatrixXd reference = oracle::kmeans_reference(points, k, seed);
    CHECK((mine.centers - reference).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("blob clustering recovers centers and the regression is optimal") {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  make_blobs(features, labels, 15, 31);
  const LagUnit unit = fit_lag(features, labels, 3, 10.0, 11);

  // Residual against the SVD pseudoinverse oracle.
  Eigen::MatrixXd targets(features.rows(), unit.m_prime());
  for (Eigen::Index j = 0; j < features.rows(); ++j) {
    targets.row(j) = prob_target(unit, features.row(j).transpose(), labels[static_cast<std::size_t>(j)]).transpose();
  }
  Eigen::MatrixXd design(features.rows(), 3);
  design.leftCols(2) = features;
  design.col(2).setOnes();
  const double mine = (design * unit.regression.transpose() - targets).norm();
  const double oracle_res = oracle::lsq_residual_svd(features, targets);
  CHECK(mine <= oracle_res + 1e-10);
  CHECK(std::abs(mine - oracle_res) < 1e-8);
}

TEST_CASE("class smaller than L is rejected") {
  Eigen::MatrixXd features = oracle::random_matrix(5, 2, 77);
  std::vector<int> labels{0, 0, 0, 1, 1};
  CHECK_THROWS_AS((void)fit_lag(features, labels, 3, 10.0, 1), DataError);
}

TEST_CASE("zero regression with a bias column returns the bias everywhere") {
  LagUnit unit;
  unit.M = 2;
  unit.L = 1;
  unit.n = 3;
  unit.regression = Eigen::MatrixXd::Zero(2, 4);
  unit.regression(0, 3) = 0.25;
  unit.regression(1, 3) = -1.5;
  unit.centers = Eigen::MatrixXd::Zero(2, 3);
  const Eigen::MatrixXd out = apply_lag(unit, oracle::random_matrix(5, 3, 8));
  for (int j = 0; j < 5; ++j) {
    CHECK(out(j, 0) == 0.25);
    CHECK(out(j, 1) == -1.5);
  }
}

TEST_CASE("the exactly solvable 1D case is reproduced") {
  Eigen::MatrixXd features(4, 1);
  features << 0.0, 1.0, 0.0, 1.0;
  std::vector<int> labels{0, 1, 0, 1};
  const LagUnit unit = fit_lag(features, labels, 1, 10.0, 3);
  const Eigen::MatrixXd out = apply_lag(unit, features);
  for (int j = 0; j < 4; ++j) {
    CHECK(out(j, labels[static_cast<std::size_t>(j)]) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out(j, 1 - labels[static_cast<std::size_t>(j)]) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("identical data and seed give identical units") {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  make_blobs(features, labels, 10, 3);
  const LagUnit a = fit_lag(features, labels, 2, 10.0, 555);
  const LagUnit b = fit_lag(features, labels, 2, 10.0, 555);
  CHECK(oracle::bitwise_equal(a.centers, b.centers));
  CHECK(oracle::bitwise_equal(a.regression, b.regression));
}

TEST_CASE("dimension mismatches are rejected") {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  make_blobs(features, labels, 5, 4);
  const LagUnit unit = fit_lag(features, labels, 2, 10.0, 1);
  CHECK_THROWS_AS((void)apply_lag(unit, oracle::random_matrix(3, 5, 1)), ShapeError);
}

TEST_SUITE_END();
