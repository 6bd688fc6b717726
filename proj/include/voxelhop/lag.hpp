#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace voxelhop {

// Label-assisted regression unit for one stage: per-class k-means centers,
// soft-association probability targets, and a linear least-squares map from
// the n-dim attribute vector to the M' = M*L target space.
struct LagUnit {
  int M = 2;      // class count
  int L = 3;      // clusters per class
  int n = 0;      // input feature dimension
  double omega = 10.0;
  Eigen::MatrixXd centers;     // (M*L) x n, class-major blocks of L rows
  Eigen::MatrixXd regression;  // M' x (n+1): weights and a trailing bias column

  int m_prime() const { return M * L; }
};

struct KmeansResult {
  Eigen::MatrixXd centers;      // k x n
  std::vector<int> assignment;  // per sample, ties to the lowest center index
  int iterations = 0;
};

// Deterministic Lloyd's algorithm with k-means++ seeding on the SplitMix64
// counter stream. Converges when the largest center shift drops below tol.
KmeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& points, int k, std::uint64_t seed,
                    int max_iter = 300, double tol = 1e-6);

// Softmax of -omega * euclidean_distance(x, center) over one class's centers.
Eigen::VectorXd soft_assoc(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::MatrixXd>& class_centers, double omega);

// Per-sample probability target: the sample's own-class block is its soft
// association, every other block is exactly zero.
Eigen::VectorXd prob_target(const LagUnit& unit, const Eigen::Ref<const Eigen::VectorXd>& x, int label);

LagUnit fit_lag(const Eigen::Ref<const Eigen::MatrixXd>& features, const std::vector<int>& labels,
                int L, double omega, std::uint64_t seed);

// Raw affine outputs regression * (x; 1), one row per input row.
Eigen::MatrixXd apply_lag(const LagUnit& unit, const Eigen::Ref<const Eigen::MatrixXd>& features);

}  // namespace voxelhop
