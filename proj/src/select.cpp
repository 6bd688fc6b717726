#include "voxelhop/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "voxelhop/errors.hpp"

namespace voxelhop {

BinnedEstimator BinnedEstimator::fit(const std::vector<double>& values, const std::vector<int>& labels,
                                     int num_classes, int bins) {
  if (values.size() != labels.size()) throw ShapeError("values/labels size mismatch");
  if (values.size() < 2) throw DataError("estimator needs at least 2 samples");
  if (bins < 1) throw ConfigError("bin count must be >= 1");
  if (num_classes < 2) throw ConfigError("need at least 2 classes");

  BinnedEstimator est;
  const std::size_t n = values.size();

  // Quantile edges: the sorted value at rank floor(i*n/bins). Comparing
  // samples against data-rank edges keeps bin membership invariant under
  // strictly monotone feature transforms.
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  est.edges_.reserve(static_cast<std::size_t>(bins) - 1);
  for (int i = 1; i < bins; ++i) {
    const std::size_t rank = std::min(n - 1, static_cast<std::size_t>(i) * n / static_cast<std::size_t>(bins));
    est.edges_.push_back(sorted[rank]);
  }

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(bins, num_classes);
  for (std::size_t j = 0; j < n; ++j) {
    if (labels[j] < 0 || labels[j] >= num_classes) throw DataError("label out of range");
    counts(est.bin_of(values[j]), labels[j]) += 1.0;
  }

  // Laplace smoothing keeps every probability strictly positive.
  est.probs_ = (counts.array() + 1.0).colwise() / (counts.rowwise().sum().array() + num_classes);
  return est;
}

int BinnedEstimator::bin_of(double value) const {
  return static_cast<int>(std::upper_bound(edges_.begin(), edges_.end(), value) - edges_.begin());
}

double BinnedEstimator::prob(double value, int cls) const { return probs_(bin_of(value), cls); }

Volume4D aggregate(const Volume4D& attr, const AggSpec& spec, int group) {
  if (group < 1 || attr.k % group != 0) throw ShapeError("attribute vertical extent not a multiple of group");
  const int v_extent = attr.k / group;
  const int ratio_h = spec.global_h() ? attr.s : spec.h;
  const int ratio_v = spec.global_v() ? v_extent : spec.v;
  if (!spec.global_h() && ratio_h < 2) throw ShapeError("aggregation ratios must be >= 2");
  if (!spec.global_v() && ratio_v < 2) throw ShapeError("aggregation ratios must be >= 2");
  if (ratio_h == 1 && ratio_v == 1) return attr;  // global over already-degenerate extents
  return detail_block_max(attr, ratio_h, ratio_v, group);
}

Eigen::MatrixXd feature_summaries(const std::vector<Volume4D>& aggregated_per_sample, SummaryMode mode) {
  if (aggregated_per_sample.empty()) throw DataError("no samples");
  const Volume4D& first = aggregated_per_sample.front();
  const int Q = first.k;
  const int P = first.s;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(aggregated_per_sample.size()), Q);
  for (std::size_t j = 0; j < aggregated_per_sample.size(); ++j) {
    const Volume4D& vol = aggregated_per_sample[j];
    if (vol.s != P || vol.k != Q || vol.c != 1) throw ShapeError("aggregated samples disagree on dims");
    for (int q = 0; q < Q; ++q) {
      double acc = (mode == SummaryMode::kMax) ? -std::numeric_limits<double>::infinity() : 0.0;
      for (int p1 = 0; p1 < P; ++p1) {
        for (int p2 = 0; p2 < P; ++p2) {
          const double v = vol.at(p1, p2, q);
          if (mode == SummaryMode::kMax) {
            acc = std::max(acc, v);
          } else {
            acc += v;
          }
        }
      }
      out(static_cast<Eigen::Index>(j), q) = (mode == SummaryMode::kMax) ? acc : acc / (P * P);
    }
  }
  return out;
}

std::vector<double> score_features(const Eigen::Ref<const Eigen::MatrixXd>& summaries,
                                   const std::vector<int>& labels, int num_classes, int bins) {
  const std::size_t J = static_cast<std::size_t>(summaries.rows());
  if (J < 2) throw DataError("feature scoring needs at least 2 samples");
  if (labels.size() != J) throw ShapeError("labels size mismatch");
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DataError("feature scoring requires samples from both classes");

  std::vector<double> scores(static_cast<std::size_t>(summaries.cols()));
  std::vector<double> column(J);
  for (Eigen::Index q = 0; q < summaries.cols(); ++q) {
    for (std::size_t j = 0; j < J; ++j) column[j] = summaries(static_cast<Eigen::Index>(j), q);
    const BinnedEstimator est = BinnedEstimator::fit(column, labels, num_classes, bins);
    double L = 0.0;
    for (std::size_t j = 0; j < J; ++j) L -= std::log(est.prob(column[j], labels[j]));
    scores[static_cast<std::size_t>(q)] = L;
  }
  return scores;
}

SelectionMask select_top(const std::vector<double>& scores, double keep_fraction) {
  if (keep_fraction <= 0.0 || keep_fraction > 1.0) throw ConfigError("keep_fraction must be in (0, 1]");
  const int Q = static_cast<int>(scores.size());
  const int keep = static_cast<int>(std::ceil(keep_fraction * Q));

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });

  SelectionMask mask;
  mask.scores = scores;
  mask.kept.assign(order.begin(), order.begin() + keep);
  return mask;
}

Eigen::MatrixXd assemble_features(const std::vector<std::vector<Volume4D>>& aggregated,
                                  const std::vector<SelectionMask>& channel_masks) {
  if (aggregated.empty()) throw DataError("no samples");
  Eigen::Index cols = 0;
  for (std::size_t c = 0; c < channel_masks.size(); ++c) {
    const Volume4D& slab = aggregated.front()[c];
    cols += static_cast<Eigen::Index>(slab.s) * slab.s * channel_masks[c].kept.size();
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(aggregated.size()), cols);
  for (std::size_t j = 0; j < aggregated.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = assemble_features_one(aggregated[j], channel_masks).transpose();
  }
  return out;
}

Eigen::VectorXd assemble_features_one(const std::vector<Volume4D>& aggregated_channels,
                                      const std::vector<SelectionMask>& channel_masks) {
  if (aggregated_channels.size() != channel_masks.size()) throw ShapeError("channel count mismatch");
  std::size_t total = 0;
  for (std::size_t c = 0; c < channel_masks.size(); ++c) {
    const Volume4D& slab = aggregated_channels[c];
    total += static_cast<std::size_t>(slab.s) * slab.s * channel_masks[c].kept.size();
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(total));
  Eigen::Index pos = 0;
  for (std::size_t c = 0; c < channel_masks.size(); ++c) {
    const Volume4D& slab = aggregated_channels[c];
    for (int q : channel_masks[c].kept) {
      if (q < 0 || q >= slab.k) throw ShapeError("selection mask index out of range");
      for (int p1 = 0; p1 < slab.s; ++p1) {
        for (int p2 = 0; p2 < slab.s; ++p2) out[pos++] = slab.at(p1, p2, q);
      }
    }
  }
  return out;
}

}  // namespace voxelhop
