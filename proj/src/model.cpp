#include "voxelhop/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "voxelhop/errors.hpp"
#include "voxelhop/rng.hpp"
#include "voxelhop/threading.hpp"

namespace voxelhop {

void validate_config(const RunConfig& config) {
  if (config.stages.empty()) throw ConfigError("config needs at least one stage");
  if (config.aggregation.size() != config.stages.size()) {
    throw ConfigError("aggregation spec count (" + std::to_string(config.aggregation.size()) +
                      ") must match stage count (" + std::to_string(config.stages.size()) + ")");
  }
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const StageConfig& st = config.stages[i];
    if (st.s < 1 || st.v < 1) throw ConfigError("stage " + std::to_string(i + 1) + ": window sizes must be >= 1");
    if (st.energy.threshold <= 0.0 || st.energy.threshold > 1.0) {
      throw ConfigError("stage " + std::to_string(i + 1) + ": energy threshold must be in (0, 1]");
    }
    if (st.energy.max_filters && *st.energy.max_filters < 1) {
      throw ConfigError("stage " + std::to_string(i + 1) + ": max_filters must be >= 1");
    }
    const AggSpec& agg = config.aggregation[i];
    if ((agg.h != 0 && agg.h < 2) || (agg.v != 0 && agg.v < 2)) {
      throw ConfigError("stage " + std::to_string(i + 1) + ": aggregation ratios must be 0 (global) or >= 2");
    }
  }
  if (config.keep_fraction <= 0.0 || config.keep_fraction > 1.0) {
    throw ConfigError("keep_fraction must be in (0, 1]");
  }
  if (config.L < 1) throw ConfigError("L must be >= 1");
  if (config.omega <= 0.0) throw ConfigError("omega must be positive");
  if (config.score_bins < 1) throw ConfigError("score_bins must be >= 1");
  if (config.repeats < 1) throw ConfigError("repeats must be >= 1");
}

namespace {

void validate_dataset(const Dataset& dataset, int min_per_class) {
  if (dataset.volumes.empty()) throw DataError("dataset is empty");
  if (dataset.volumes.size() != dataset.labels.size()) throw DataError("labels/volumes size mismatch");
  int pos = 0, neg = 0;
  for (int l : dataset.labels) {
    if (l == 0) {
      ++neg;
    } else if (l == 1) {
      ++pos;
    } else {
      throw DataError("labels must be 0 or 1");
    }
  }
  if (pos < min_per_class || neg < min_per_class) {
    throw DataError("need at least " + std::to_string(min_per_class) + " samples per class");
  }
  const Volume4D& first = dataset.volumes.front();
  for (const Volume4D& v : dataset.volumes) {
    v.validate();
    if (v.s != first.s || v.k != first.k || v.c != first.c) throw ShapeError("samples disagree on dims");
  }
}

std::vector<Volume4D> aggregate_stage_channels(const std::vector<Volume4D>& attrs, const AggSpec& agg,
                                               const StageBanks& banks) {
  std::vector<Volume4D> out(attrs.size());
  for (std::size_t c = 0; c < attrs.size(); ++c) {
    out[c] = aggregate(attrs[c], agg, banks.per_channel[c].F);
  }
  return out;
}

}  // namespace

TrainedModel fit(const Dataset& dataset, const RunConfig& config, int threads) {
  validate_config(config);
  validate_dataset(dataset, 1);
  const Volume4D& first = dataset.volumes.front();

  const PlanReport plan = plan_shapes(first.s, first.k, first.c, config.stages, config.aggregation);
  if (!plan.ok) throw ConfigError("illegal stage schedule: " + plan.reason);

  const std::size_t J = dataset.volumes.size();
  const int C = first.c;
  const int I = static_cast<int>(config.stages.size());

  TrainedModel model;
  model.config = config;
  model.cascade.channels = C;
  model.cascade.s0 = first.s;
  model.cascade.k0 = first.k;
  model.cascade.configs = config.stages;

  // Module 1, streamed stage by stage: fit banks, transform every sample,
  // keep only the aggregated attributes and the pooled tensors that feed the
  // next stage.
  std::vector<std::vector<Volume4D>> current(J);  // [sample][channel]
  parallel_for(J, threads, [&](std::size_t j) {
    current[j].resize(C);
    for (int c = 0; c < C; ++c) current[j][c] = channel_slab(dataset.volumes[j], c);
  });

  // aggregated[stage][sample][channel]
  std::vector<std::vector<std::vector<Volume4D>>> aggregated(I);
  std::vector<int> groups(C, 1);
  for (int i = 0; i < I; ++i) {
    const StageConfig& cfg = config.stages[i];
    StageBanks banks = fit_stage_banks(current, cfg, groups, threads);
    aggregated[i].resize(J);
    std::vector<std::vector<Volume4D>> next(J);
    parallel_for(J, threads, [&](std::size_t j) {
      next[j].resize(C);
      aggregated[i][j].resize(C);
      for (int c = 0; c < C; ++c) {
        const SaabFilterBank& bank = banks.per_channel[c];
        Volume4D attr = apply_stage_channel(bank, current[j][c], cfg, groups[c]);
        aggregated[i][j][c] = aggregate(attr, config.aggregation[i], bank.F);
        next[j][c] = pool_stage_output(attr, cfg, bank.F);
      }
    });
    for (int c = 0; c < C; ++c) groups[c] = banks.per_channel[c].F;
    model.cascade.banks.push_back(std::move(banks));
    current = std::move(next);
  }
  current.clear();

  // Module 2: per-stage cross-entropy selection + LAG.
  model.masks.resize(I);
  model.lag_units.resize(I);
  Eigen::MatrixXd concat(J, static_cast<Eigen::Index>(I) * 2 * config.L);
  for (int i = 0; i < I; ++i) {
    model.masks[i].resize(C);
    for (int c = 0; c < C; ++c) {
      std::vector<Volume4D> per_sample(J);
      for (std::size_t j = 0; j < J; ++j) per_sample[j] = aggregated[i][j][c];
      const Eigen::MatrixXd summaries = feature_summaries(per_sample, config.summary);
      const std::vector<double> scores = score_features(summaries, dataset.labels, 2, config.score_bins);
      SelectionMask mask = select_top(scores, config.keep_fraction);
      mask.stage = i + 1;
      mask.channel = c;
      model.masks[i][c] = std::move(mask);
    }
    const Eigen::MatrixXd features = assemble_features(aggregated[i], model.masks[i]);
    model.lag_units[i] = fit_lag(features, dataset.labels, config.L, config.omega,
                                 Rng::derive(config.seed, 0x6c6167ULL, static_cast<std::uint64_t>(i)));
    concat.middleCols(static_cast<Eigen::Index>(i) * 2 * config.L, 2 * config.L) =
        apply_lag(model.lag_units[i], features);
  }
  aggregated.clear();

  // Module 3: linear least squares onto +-1 targets, decision threshold 0.
  Eigen::MatrixXd design(J, concat.cols() + 1);
  design.leftCols(concat.cols()) = concat;
  design.col(concat.cols()).setOnes();
  Eigen::VectorXd targets(J);
  for (std::size_t j = 0; j < J; ++j) targets[static_cast<Eigen::Index>(j)] = dataset.labels[j] == 1 ? 1.0 : -1.0;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(design);
  model.classifier = cod.solve(targets);
  model.threshold = 0.0;
  return model;
}

Eigen::VectorXd final_features(const TrainedModel& model, const Volume4D& x, int threads) {
  const std::vector<std::vector<Volume4D>> attrs = apply_cascade(model.cascade, x, threads);
  const int I = model.cascade.stage_count();
  const int m_prime = 2 * model.config.L;
  Eigen::VectorXd out(static_cast<Eigen::Index>(I) * m_prime);
  for (int i = 0; i < I; ++i) {
    const std::vector<Volume4D> agg =
        aggregate_stage_channels(attrs[i], model.config.aggregation[i], model.cascade.banks[i]);
    const Eigen::VectorXd features = assemble_features_one(agg, model.masks[i]);
    out.segment(static_cast<Eigen::Index>(i) * m_prime, m_prime) =
        apply_lag(model.lag_units[i], features.transpose()).row(0).transpose();
  }
  return out;
}

Prediction predict(const TrainedModel& model, const Volume4D& x, int threads) {
  const Eigen::VectorXd z = final_features(model, x, threads);
  if (z.size() + 1 != model.classifier.size()) throw ShapeError("classifier dimension mismatch");
  Prediction p;
  p.score = model.classifier.head(z.size()).dot(z) + model.classifier[z.size()];
  p.label = p.score > model.threshold ? 1 : 0;  // ties go to the control class
  return p;
}

EvalReport loocv(const Dataset& dataset, const RunConfig& config, int threads) {
  validate_config(config);
  validate_dataset(dataset, 2);
  const std::size_t J = dataset.volumes.size();
  const int R = config.repeats;

  EvalReport report;
  report.folds = static_cast<int>(J);
  report.repeats = R;
  report.labels = dataset.labels;
  report.ids = dataset.ids;
  report.per_repeat.resize(R);

  const auto t0 = std::chrono::steady_clock::now();
  bool params_set = false;
  for (int r = 0; r < R; ++r) {
    RepeatResult& rr = report.per_repeat[r];
    rr.scores.assign(J, 0.0);
    std::vector<ParamCounts> fold_params(J);
    parallel_for(J, threads, [&](std::size_t fold) {
      Dataset rest;
      rest.volumes.reserve(J - 1);
      rest.labels.reserve(J - 1);
      for (std::size_t j = 0; j < J; ++j) {
        if (j == fold) continue;
        rest.volumes.push_back(dataset.volumes[j]);
        rest.labels.push_back(dataset.labels[j]);
      }
      RunConfig fold_config = config;
      fold_config.seed = Rng::derive(config.seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(fold));
      const TrainedModel fold_model = fit(rest, fold_config, 1);
      rr.scores[fold] = predict(fold_model, dataset.volumes[fold], 1).score;
      fold_params[fold] = count_parameters(fold_model);
    });
    if (!params_set) {
      report.params = fold_params[0];
      params_set = true;
    }
    for (std::size_t j = 0; j < J; ++j) {
      const bool positive = rr.scores[j] > 0.0;
      if (dataset.labels[j] == 1) {
        positive ? ++rr.tp : ++rr.fn;
      } else {
        positive ? ++rr.fp : ++rr.tn;
      }
    }
    rr.accuracy = static_cast<double>(rr.tp + rr.tn) / static_cast<double>(J);
    rr.auc = auc(rr.scores, dataset.labels);
  }
  const auto t1 = std::chrono::steady_clock::now();
  report.fit_seconds_total = std::chrono::duration<double>(t1 - t0).count();
  report.fit_seconds_mean = report.fit_seconds_total / (static_cast<double>(J) * R);

  auto mean_std = [](auto getter, const std::vector<RepeatResult>& rs, double& mean, double& sd) {
    mean = 0.0;
    for (const auto& r : rs) mean += getter(r);
    mean /= static_cast<double>(rs.size());
    sd = 0.0;
    for (const auto& r : rs) sd += (getter(r) - mean) * (getter(r) - mean);
    sd = rs.size() > 1 ? std::sqrt(sd / static_cast<double>(rs.size() - 1)) : 0.0;
  };
  mean_std([](const RepeatResult& r) { return r.accuracy; }, report.per_repeat, report.accuracy_mean,
           report.accuracy_std);
  mean_std([](const RepeatResult& r) { return r.auc; }, report.per_repeat, report.auc_mean, report.auc_std);
  report.roc_points = roc(report.per_repeat.front().scores, dataset.labels);
  return report;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores/labels size mismatch");
  std::vector<double> neg;
  std::size_t n_pos = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (labels[j] == 1) {
      ++n_pos;
    } else {
      neg.push_back(scores[j]);
    }
  }
  if (n_pos == 0 || neg.empty()) throw DataError("AUC requires both classes");
  std::sort(neg.begin(), neg.end());
  double u = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (labels[j] != 1) continue;
    const auto lo = std::lower_bound(neg.begin(), neg.end(), scores[j]);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), scores[j]);
    u += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return u / (static_cast<double>(n_pos) * static_cast<double>(neg.size()));
}

std::vector<std::pair<double, double>> roc(const std::vector<double>& scores,
                                           const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores/labels size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw DataError("ROC requires both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<std::pair<double, double>> points;
  points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    points.emplace_back(static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos);
  }
  return points;
}

ParamCounts count_parameters(const TrainedModel& model) {
  ParamCounts counts;
  for (const StageBanks& banks : model.cascade.banks) {
    for (const SaabFilterBank& bank : banks.per_channel) {
      counts.saab += static_cast<long long>(bank.F) * bank.n + 1;  // anchors + shared bias
    }
  }
  for (const LagUnit& unit : model.lag_units) {
    counts.lag += static_cast<long long>(unit.m_prime()) * (unit.n + 1)  // regression
                  + static_cast<long long>(unit.m_prime()) * unit.n;     // centers
  }
  counts.classifier = static_cast<long long>(model.classifier.size());
  counts.total = counts.saab + counts.lag + counts.classifier;
  return counts;
}

}  // namespace voxelhop
