#include "voxelhop/saab.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "voxelhop/errors.hpp"

namespace voxelhop {

SaabAccumulator::SaabAccumulator(int n) : n_(n) {
  if (n < 1) throw ShapeError("saab input dimension must be >= 1");
  residual_sum_ = Eigen::VectorXd::Zero(n);
  residual_scatter_ = Eigen::MatrixXd::Zero(n, n);
}

void SaabAccumulator::add(const Eigen::Ref<const Eigen::MatrixXd>& rows) {
  if (rows.cols() != n_) throw ShapeError("saab accumulator dimension mismatch");
  if (rows.rows() == 0) return;

  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_));
  // Residual after removing the projection onto the constant DC direction:
  // r = x - (a0^T x) a0, with a0 = inv_sqrt_n * ones.
  Eigen::VectorXd dc = rows.rowwise().sum() * inv_sqrt_n;          // a0^T x per row
  Eigen::MatrixXd residuals = rows;
  residuals.noalias() -= dc * Eigen::RowVectorXd::Constant(n_, inv_sqrt_n);

  residual_sum_ += residuals.colwise().sum().transpose();
  residual_scatter_.selfadjointView<Eigen::Lower>().rankUpdate(residuals.transpose(), 1.0);
  max_norm_ = std::max(max_norm_, rows.rowwise().norm().maxCoeff());
  count_ += rows.rows();
}

void SaabAccumulator::merge(const SaabAccumulator& other) {
  if (other.n_ != n_) throw ShapeError("saab accumulator dimension mismatch");
  residual_sum_ += other.residual_sum_;
  residual_scatter_ += other.residual_scatter_;
  max_norm_ = std::max(max_norm_, other.max_norm_);
  count_ += other.count_;
}

namespace {

// Deterministic sign convention: the largest-magnitude entry of each anchor
// is positive; magnitude ties resolve to the lowest index.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  double best_mag = std::abs(v[0]);
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    const double mag = std::abs(v[i]);
    if (mag > best_mag) {
      best_mag = mag;
      best = i;
    }
  }
  if (v[best] < 0.0) v = -v;
}

}  // namespace

SaabFilterBank SaabAccumulator::finalize(const EnergyPolicy& policy) const {
  if (policy.threshold <= 0.0 || policy.threshold > 1.0) {
    throw ConfigError("energy threshold must be in (0, 1]");
  }
  if (count_ < 2) throw DataError("saab fit needs at least 2 samples, got " + std::to_string(count_));

  SaabFilterBank bank;
  bank.n = n_;
  bank.dc_anchor = Eigen::VectorXd::Constant(n_, 1.0 / std::sqrt(static_cast<double>(n_)));
  bank.bias = max_norm_;

  if (n_ == 1) {
    // Degenerate window: the DC direction spans the space.
    bank.F = 1;
    bank.ac_anchors.resize(0, 1);
    bank.ac_eigenvalues.resize(0);
    return bank;
  }

  const double inv_count = 1.0 / static_cast<double>(count_);
  Eigen::VectorXd mean = residual_sum_ * inv_count;
  Eigen::MatrixXd cov = residual_scatter_.selfadjointView<Eigen::Lower>();
  cov *= inv_count;
  cov.noalias() -= mean * mean.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DataError("eigendecomposition failed");

  // Eigen returns ascending order; walk from the back for descending.
  const Eigen::VectorXd& eval = solver.eigenvalues();
  const Eigen::MatrixXd& evec = solver.eigenvectors();

  std::vector<double> lambdas;
  lambdas.reserve(n_);
  double total = 0.0;
  for (Eigen::Index i = eval.size() - 1; i >= 0; --i) {
    const double l = std::max(eval[i], 0.0);  // tiny negatives are numerical noise
    lambdas.push_back(l);
    total += l;
  }
  bank.total_ac_energy = total;

  int max_ac = n_ - 1;
  if (policy.max_filters) max_ac = std::min(max_ac, std::max(0, *policy.max_filters - 1));

  int kept = 0;
  if (total > 0.0) {
    const double target = policy.threshold * total;
    double cum = 0.0;
    for (int i = 0; i < max_ac; ++i) {
      if (lambdas[static_cast<std::size_t>(i)] <= 0.0) break;
      cum += lambdas[static_cast<std::size_t>(i)];
      ++kept;
      if (cum >= target) break;
    }
  }

  bank.F = 1 + kept;
  bank.ac_anchors.resize(kept, n_);
  bank.ac_eigenvalues.resize(kept);
  for (int i = 0; i < kept; ++i) {
    Eigen::VectorXd v = evec.col(eval.size() - 1 - i);
    fix_sign(v);
    bank.ac_anchors.row(i) = v.transpose();
    bank.ac_eigenvalues[i] = lambdas[static_cast<std::size_t>(i)];
  }
  return bank;
}

SaabFilterBank fit_saab(const Eigen::Ref<const Eigen::MatrixXd>& samples, const EnergyPolicy& policy) {
  if (samples.rows() < 2) throw DataError("saab fit needs at least 2 samples");
  if (!samples.allFinite()) throw DataError("saab fit requires finite samples");
  SaabAccumulator acc(static_cast<int>(samples.cols()));
  acc.add(samples);
  return acc.finalize(policy);
}

Eigen::MatrixXd apply_saab(const SaabFilterBank& bank, const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  if (samples.cols() != bank.n) throw ShapeError("saab apply dimension mismatch");
  Eigen::MatrixXd out(samples.rows(), bank.F);
  out.col(0) = samples * bank.dc_anchor;
  if (bank.F > 1) out.rightCols(bank.F - 1) = samples * bank.ac_anchors.transpose();
  out.array() += bank.bias;
  return out;
}

std::vector<std::pair<int, double>> energy_curve(const SaabFilterBank& bank) {
  std::vector<std::pair<int, double>> curve;
  curve.reserve(static_cast<std::size_t>(bank.ac_eigenvalues.size()));
  double cum = 0.0;
  for (Eigen::Index i = 0; i < bank.ac_eigenvalues.size(); ++i) {
    cum += bank.ac_eigenvalues[i];
    curve.emplace_back(static_cast<int>(i) + 1, bank.total_ac_energy > 0.0 ? cum / bank.total_ac_energy : 1.0);
  }
  return curve;
}

}  // namespace voxelhop
