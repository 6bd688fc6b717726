#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "voxelhop/hop.hpp"
#include "voxelhop/lag.hpp"
#include "voxelhop/select.hpp"
#include "voxelhop/tensor.hpp"

namespace voxelhop {

struct Dataset {
  std::vector<Volume4D> volumes;
  std::vector<int> labels;       // 0 = control (negative), 1 = patient (positive)
  std::vector<std::string> ids;  // optional, parallel to volumes when present
};

// Full training configuration. Stage windows/pooling drive Module 1,
// aggregation + keep_fraction Module 2's selection, L/omega the LAG units.
struct RunConfig {
  std::vector<StageConfig> stages;
  std::vector<AggSpec> aggregation;
  double keep_fraction = 0.6;
  int L = 3;
  double omega = 10.0;
  int score_bins = 16;
  SummaryMode summary = SummaryMode::kMean;
  std::uint64_t seed = 1;
  int repeats = 1;
};

// Structural validation (ranges, matching lengths). Shape legality against
// concrete input dims is plan_shapes' job.
void validate_config(const RunConfig& config);

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct TrainedModel {
  std::uint32_t format_version = kModelFormatVersion;
  RunConfig config;
  HopCascade cascade;
  std::vector<std::vector<SelectionMask>> masks;  // [stage][channel]
  std::vector<LagUnit> lag_units;                 // [stage]
  Eigen::VectorXd classifier;                     // M'*I weights + bias
  double threshold = 0.0;
};

struct Prediction {
  double score = 0.0;
  int label = 0;
};

struct ParamCounts {
  long long saab = 0;
  long long lag = 0;
  long long classifier = 0;
  long long total = 0;
};

struct RepeatResult {
  std::vector<double> scores;  // per held-out sample, manifest order
  double accuracy = 0.0;
  double auc = 0.0;
  long long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct EvalReport {
  int folds = 0;
  int repeats = 1;
  std::vector<RepeatResult> per_repeat;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double auc_mean = 0.0, auc_std = 0.0;
  std::vector<std::pair<double, double>> roc_points;  // (fpr, tpr) of repeat 0
  ParamCounts params;                                 // representative fold-0 model
  double fit_seconds_total = 0.0;
  double fit_seconds_mean = 0.0;
  std::vector<int> labels;
  std::vector<std::string> ids;
};

// Trains the full pipeline: unsupervised cascade, per-stage aggregation +
// cross-entropy selection + LAG, and a linear least-squares classifier on
// the concatenated M'-dim stage features against +-1 targets (threshold 0).
TrainedModel fit(const Dataset& dataset, const RunConfig& config, int threads = 0);

Prediction predict(const TrainedModel& model, const Volume4D& x, int threads = 0);

// Concatenated M'*I feature vector for one sample (the classifier input).
Eigen::VectorXd final_features(const TrainedModel& model, const Volume4D& x, int threads = 0);

// Leave-one-out cross-validation at fixed hyperparameters. Fold f of repeat
// r trains with seed derive(config.seed, r, f); folds never see the held-out
// sample.
EvalReport loocv(const Dataset& dataset, const RunConfig& config, int threads = 0);

// Mann-Whitney AUC; ties contribute 1/2. Requires both classes.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// ROC staircase from (0,0) to (1,1), one point per distinct threshold.
std::vector<std::pair<double, double>> roc(const std::vector<double>& scores,
                                           const std::vector<int>& labels);

ParamCounts count_parameters(const TrainedModel& model);

// Versioned little-endian section format with CRC32 per section.
void save_model(const TrainedModel& model, std::ostream& out);
TrainedModel load_model(std::istream& in);
void save_model_file(const TrainedModel& model, const std::string& path);
TrainedModel load_model_file(const std::string& path);

}  // namespace voxelhop
