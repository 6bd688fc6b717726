#pragma once

#include <Eigen/Dense>
#include <vector>

#include "voxelhop/hop.hpp"
#include "voxelhop/tensor.hpp"

namespace voxelhop {

enum class SummaryMode {
  kMean,  // mean over the P x P plane (default)
  kMax,
};

// Kept vertical-feature indices for one (stage, channel), ordered by
// ascending cross-entropy (ties by lower feature index). `scores` holds the
// cross-entropy of every candidate feature, indexed by feature.
struct SelectionMask {
  int stage = 0;
  int channel = 0;
  std::vector<int> kept;
  std::vector<double> scores;

  int total_features() const { return static_cast<int>(scores.size()); }
};

// Class-conditional histogram over quantile bins with +1 Laplace smoothing;
// realizes the per-sample class probability used by the cross-entropy score.
class BinnedEstimator {
 public:
  static BinnedEstimator fit(const std::vector<double>& values, const std::vector<int>& labels,
                             int num_classes, int bins);

  int bin_of(double value) const;
  double prob(double value, int cls) const;  // P(cls | bin(value)), always > 0
  int bins() const { return static_cast<int>(probs_.rows()); }

 private:
  std::vector<double> edges_;  // bins-1 quantile edges
  Eigen::MatrixXd probs_;      // bins x classes
};

// Aggregates one pre-pool attribute slab to P x P x Q per the stage's
// AggSpec (0 => global max over that axis). `group` is the channel's filter
// count F_i.
Volume4D aggregate(const Volume4D& attr, const AggSpec& spec, int group);

// Per-sample scalar summaries of each vertical feature: row j holds sample
// j's Q summaries (one per P x P x 1 slab).
Eigen::MatrixXd feature_summaries(const std::vector<Volume4D>& aggregated_per_sample,
                                  SummaryMode mode);

// Cross-entropy of each feature column of `summaries` (J x Q) under the
// binned estimator; lower is better. Requires both classes present.
std::vector<double> score_features(const Eigen::Ref<const Eigen::MatrixXd>& summaries,
                                   const std::vector<int>& labels, int num_classes, int bins);

// Keeps ceil(keep_fraction * Q) lowest-scoring features.
SelectionMask select_top(const std::vector<double>& scores, double keep_fraction);

// Flattens the kept features of every channel into one row vector per
// sample: channels outermost, then kept features in mask order, then the
// P x P plane row-major.
Eigen::MatrixXd assemble_features(const std::vector<std::vector<Volume4D>>& aggregated,
                                  const std::vector<SelectionMask>& channel_masks);
Eigen::VectorXd assemble_features_one(const std::vector<Volume4D>& aggregated_channels,
                                      const std::vector<SelectionMask>& channel_masks);

}  // namespace voxelhop
