#include "voxelhop/lag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "voxelhop/errors.hpp"
#include "voxelhop/rng.hpp"

namespace voxelhop {

namespace {

// Index of the nearest center; ties resolve to the lowest index.
int nearest_center(const Eigen::Ref<const Eigen::MatrixXd>& centers, const Eigen::Ref<const Eigen::VectorXd>& x) {
  int best = 0;
  double best_d = (centers.row(0).transpose() - x).squaredNorm();
  for (Eigen::Index c = 1; c < centers.rows(); ++c) {
    const double d = (centers.row(c).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

KmeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& points, int k, std::uint64_t seed,
                    int max_iter, double tol) {
  const Eigen::Index J = points.rows();
  if (k < 1) throw ConfigError("k must be >= 1");
  if (J < k) throw DataError("k-means needs at least k points, got " + std::to_string(J));

  Rng rng(seed);
  KmeansResult result;
  result.centers.resize(k, points.cols());

  // k-means++ seeding: first center uniform, then D^2 sampling.
  std::vector<Eigen::Index> chosen;
  chosen.push_back(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(J))));
  result.centers.row(0) = points.row(chosen[0]);
  Eigen::VectorXd dist2 = (points.rowwise() - points.row(chosen[0])).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      pick = J - 1;
      for (Eigen::Index j = 0; j < J; ++j) {
        cum += dist2[j];
        if (cum > r) {
          pick = j;
          break;
        }
      }
    } else {
      // All points coincide with existing centers; take the lowest unused index.
      for (Eigen::Index j = 0; j < J; ++j) {
        if (std::find(chosen.begin(), chosen.end(), j) == chosen.end()) {
          pick = j;
          break;
        }
      }
    }
    chosen.push_back(pick);
    result.centers.row(c) = points.row(pick);
    dist2 = dist2.cwiseMin((points.rowwise() - points.row(pick)).rowwise().squaredNorm());
  }

  result.assignment.assign(static_cast<std::size_t>(J), 0);
  for (int iter = 1; iter <= max_iter; ++iter) {
    result.iterations = iter;
    for (Eigen::Index j = 0; j < J; ++j) {
      result.assignment[static_cast<std::size_t>(j)] = nearest_center(result.centers, points.row(j).transpose());
    }

    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index j = 0; j < J; ++j) {
      next.row(result.assignment[static_cast<std::size_t>(j)]) += points.row(j);
      counts[result.assignment[static_cast<std::size_t>(j)]] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0.0) {
        next.row(c) /= counts[c];
      } else {
        // Re-seed an empty cluster at the point farthest from its center
        // (lowest index on ties).
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index j = 0; j < J; ++j) {
          const double d =
              (points.row(j) - result.centers.row(result.assignment[static_cast<std::size_t>(j)])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = j;
          }
        }
        next.row(c) = points.row(far);
      }
    }

    const double shift = (next - result.centers).rowwise().norm().maxCoeff();
    result.centers = next;
    if (shift < tol) break;
  }

  for (Eigen::Index j = 0; j < J; ++j) {
    result.assignment[static_cast<std::size_t>(j)] = nearest_center(result.centers, points.row(j).transpose());
  }
  return result;
}

Eigen::VectorXd soft_assoc(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::MatrixXd>& class_centers, double omega) {
  if (omega <= 0.0) throw ConfigError("omega must be positive");
  const Eigen::Index L = class_centers.rows();
  Eigen::VectorXd dist(L);
  for (Eigen::Index l = 0; l < L; ++l) dist[l] = (class_centers.row(l).transpose() - x).norm();
  // Stable softmax of -omega * d.
  const double dmin = dist.minCoeff();
  Eigen::VectorXd p = (-(omega * (dist.array() - dmin))).exp();
  return p / p.sum();
}

Eigen::VectorXd prob_target(const LagUnit& unit, const Eigen::Ref<const Eigen::VectorXd>& x, int label) {
  if (label < 0 || label >= unit.M) throw DataError("label out of range");
  Eigen::VectorXd target = Eigen::VectorXd::Zero(unit.m_prime());
  target.segment(static_cast<Eigen::Index>(label) * unit.L, unit.L) =
      soft_assoc(x, unit.centers.middleRows(static_cast<Eigen::Index>(label) * unit.L, unit.L), unit.omega);
  return target;
}

LagUnit fit_lag(const Eigen::Ref<const Eigen::MatrixXd>& features, const std::vector<int>& labels,
                int L, double omega, std::uint64_t seed) {
  if (omega <= 0.0) throw ConfigError("omega must be positive");
  if (L < 1) throw ConfigError("L must be >= 1");
  const Eigen::Index J = features.rows();
  if (static_cast<std::size_t>(J) != labels.size()) throw ShapeError("labels size mismatch");

  int M = 0;
  for (int l : labels) {
    if (l < 0) throw DataError("labels must be non-negative");
    M = std::max(M, l + 1);
  }
  if (M < 2) throw DataError("LAG needs at least two classes");

  LagUnit unit;
  unit.M = M;
  unit.L = L;
  unit.omega = omega;
  unit.n = static_cast<int>(features.cols());
  unit.centers.resize(M * L, features.cols());

  for (int m = 0; m < M; ++m) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index j = 0; j < J; ++j) {
      if (labels[static_cast<std::size_t>(j)] == m) members.push_back(j);
    }
    if (static_cast<int>(members.size()) < L) {
      throw DataError("class " + std::to_string(m) + " has " + std::to_string(members.size()) +
                      " samples, fewer than L=" + std::to_string(L));
    }
    Eigen::MatrixXd class_points(members.size(), features.cols());
    for (std::size_t i = 0; i < members.size(); ++i) class_points.row(static_cast<Eigen::Index>(i)) = features.row(members[i]);
    const KmeansResult km = kmeans(class_points, L, Rng::derive(seed, 0x6b6d65616e73ULL, static_cast<std::uint64_t>(m)));
    unit.centers.middleRows(static_cast<Eigen::Index>(m) * L, L) = km.centers;
  }

  Eigen::MatrixXd targets(J, unit.m_prime());
  for (Eigen::Index j = 0; j < J; ++j) {
    targets.row(j) = prob_target(unit, features.row(j).transpose(), labels[static_cast<std::size_t>(j)]).transpose();
  }

  // Minimum-norm least squares of [X 1] W = T via a rank-revealing
  // decomposition; n typically exceeds J so rank deficiency is the norm.
  Eigen::MatrixXd design(J, features.cols() + 1);
  design.leftCols(features.cols()) = features;
  design.col(features.cols()).setOnes();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);  // must precede compute(): the rank cut shapes the decomposition
  cod.compute(design);
  unit.regression = cod.solve(targets).transpose();
  return unit;
}

Eigen::MatrixXd apply_lag(const LagUnit& unit, const Eigen::Ref<const Eigen::MatrixXd>& features) {
  if (features.cols() != unit.n) throw ShapeError("LAG input dimension mismatch");
  Eigen::MatrixXd out = features * unit.regression.leftCols(unit.n).transpose();
  out.rowwise() += unit.regression.col(unit.n).transpose();
  return out;
}

}  // namespace voxelhop
