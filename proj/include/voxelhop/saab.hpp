#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

namespace voxelhop {

struct EnergyPolicy {
  double threshold = 0.98;          // fraction of AC eigenvalue mass to keep, in (0, 1]
  std::optional<int> max_filters;   // optional cap on total filter count F
};

// One fitted Saab transform: a constant DC anchor, PCA-derived AC anchors on
// the DC-removed residual, and a shared bias that keeps training responses
// non-negative.
struct SaabFilterBank {
  int n = 0;                      // input vector length
  int F = 1;                      // total filter count (DC + AC)
  Eigen::VectorXd dc_anchor;      // (1/sqrt(n)) * ones
  Eigen::MatrixXd ac_anchors;     // (F-1) x n, orthonormal rows
  Eigen::VectorXd ac_eigenvalues; // F-1, descending, >= 0
  double bias = 0.0;              // max training-sample L2 norm
  double total_ac_energy = 0.0;   // retained + discarded eigenvalue mass
};

// Streaming second-moment accumulator for fitting a bank without holding all
// window rows in memory. add() may be called with any row chunking; the
// result depends only on the multiset of rows (up to floating-point
// associativity of the fixed chunk order).
class SaabAccumulator {
 public:
  explicit SaabAccumulator(int n);

  void add(const Eigen::Ref<const Eigen::MatrixXd>& rows);
  void merge(const SaabAccumulator& other);
  SaabFilterBank finalize(const EnergyPolicy& policy) const;

  long long count() const { return count_; }
  int dim() const { return n_; }

 private:
  int n_ = 0;
  long long count_ = 0;
  Eigen::VectorXd residual_sum_;
  Eigen::MatrixXd residual_scatter_;
  double max_norm_ = 0.0;
};

// Fits a bank from a fully materialized J x n sample matrix (J >= 2).
SaabFilterBank fit_saab(const Eigen::Ref<const Eigen::MatrixXd>& samples, const EnergyPolicy& policy);

// Applies the affine transform: column 0 is the DC response plus bias,
// columns 1..F-1 the AC responses plus bias.
Eigen::MatrixXd apply_saab(const SaabFilterBank& bank, const Eigen::Ref<const Eigen::MatrixXd>& samples);

// (ac filter count, cumulative energy fraction) pairs for the retained
// spectrum, with the fraction taken over retained plus discarded mass.
std::vector<std::pair<int, double>> energy_curve(const SaabFilterBank& bank);

}  // namespace voxelhop
