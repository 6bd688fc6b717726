// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code 0 iff all pass.
//
// The classification criteria run on the reduced 28x28x8x3 preset by
// default (the CI budget); --full additionally runs the 110x110x30x3
// end-to-end variant, which targets a desktop-CPU hour.

#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "voxelhop/errors.hpp"
#include "voxelhop/io.hpp"
#include "voxelhop/model.hpp"
#include "voxelhop/synth.hpp"

using namespace voxelhop;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool pass, const std::string& detail = "") {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << criterion << ": " << what;
  if (!detail.empty()) std::cout << "  (" << detail << ")";
  std::cout << std::endl;
  if (!pass) ++g_failures;
}

std::vector<StageConfig> five_stage_configs() {
  std::vector<StageConfig> stages(5);
  for (auto& st : stages) {
    st.s = 3;
    st.v = 3;
    st.energy.threshold = 0.98;
  }
  stages[0].pool = StagePool::kHorizontal;
  stages[1].pool = StagePool::kHorizontal;
  stages[2].pool = StagePool::kFull;
  stages[3].pool = StagePool::kFull;
  stages[4].pool = StagePool::kNone;
  return stages;
}

RunConfig five_stage_config() {
  RunConfig config;
  config.stages = five_stage_configs();
  config.aggregation = {AggSpec{4, 4}, AggSpec{4, 2}, AggSpec{4, 4}, AggSpec{2, 2}, AggSpec{0, 0}};
  return config;
}

RunConfig reduced_config() {
  RunConfig config;
  StageConfig s1;
  s1.s = 3;
  s1.v = 3;
  s1.pool = StagePool::kHorizontal;
  StageConfig s2;
  s2.s = 2;
  s2.v = 3;
  s2.pool = StagePool::kHorizontal;
  StageConfig s3;
  s3.s = 3;
  s3.v = 3;
  s3.pool = StagePool::kNone;
  config.stages = {s1, s2, s3};
  config.aggregation = {AggSpec{2, 2}, AggSpec{4, 4}, AggSpec{2, 2}};
  return config;
}

SynthParams reduced_synth(double amplitude) {
  SynthParams params;
  params.n_controls = 20;
  params.n_patients = 26;
  params.s = 28;
  params.k = 8;
  params.c = 3;
  params.signal_amplitude = amplitude;
  params.seed = 20210105;
  return params;
}

SynthParams full_synth(double amplitude) {
  SynthParams params;
  params.n_controls = 20;
  params.n_patients = 26;
  params.s = 110;
  params.k = 30;
  params.c = 3;
  params.signal_amplitude = amplitude;
  params.seed = 20210105;
  return params;
}

double oracle_auc_on(const SynthParams& params, const Dataset& dataset) {
  std::vector<double> scores;
  scores.reserve(dataset.volumes.size());
  for (const Volume4D& vol : dataset.volumes) scores.push_back(planted_roi_score(params, vol));
  return oracle::auc_pairwise(scores, dataset.labels);
}

// ---------------------------------------------------------------------------

void criterion_1_shape_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig config = five_stage_config();
  const PlanReport plan = plan_shapes(110, 30, 3, config.stages, config.aggregation);

  const int s_out[5] = {108, 52, 24, 10, 3};
  const int v_out[5] = {28, 26, 24, 10, 3};
  const int s_pooled[5] = {54, 26, 12, 5, 3};
  const int v_pooled[5] = {28, 26, 12, 5, 3};
  bool ok = plan.ok && plan.stages.size() == 5;
  if (ok) {
    for (int i = 0; i < 5; ++i) {
      ok = ok && plan.stages[i].s_out == s_out[i] && plan.stages[i].v_out == v_out[i] &&
           plan.stages[i].s_pooled == s_pooled[i] && plan.stages[i].v_pooled == v_pooled[i];
    }
    ok = ok && plan.stages[4].agg_p == 1 && plan.stages[4].agg_qv == 1;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(1, "plan reproduces the five-stage table on 110x110x30x3", ok && seconds < 1.0,
         "elapsed " + std::to_string(seconds) + "s");
}

void criterion_2_saab_algebra() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(424242);
  bool gram_ok = true, energy_ok = true, nonneg_ok = true, det_ok = true;
  int instances = 0;
  for (int trial = 0; trial < 210; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(12));
    const int J = n + 2 + static_cast<int>(rng.index(50));
    const Eigen::MatrixXd samples = oracle::random_matrix(J, n, 7000 + trial);
    const SaabFilterBank bank = fit_saab(samples, EnergyPolicy{1.0, {}});
    ++instances;

    Eigen::MatrixXd anchors(bank.F, n);
    anchors.row(0) = bank.dc_anchor.transpose();
    if (bank.F > 1) anchors.bottomRows(bank.F - 1) = bank.ac_anchors;
    const Eigen::MatrixXd gram = anchors * anchors.transpose();
    gram_ok = gram_ok && (gram - Eigen::MatrixXd::Identity(bank.F, bank.F)).cwiseAbs().maxCoeff() <= 1e-8;

    const Eigen::VectorXd x = oracle::random_matrix(n, 1, 90000 + trial).col(0);
    double captured = std::pow(bank.dc_anchor.dot(x), 2);
    for (int f = 0; f + 1 < bank.F; ++f) captured += std::pow(bank.ac_anchors.row(f).dot(x.transpose()), 2);
    energy_ok = energy_ok && std::abs(captured - x.squaredNorm()) <= 1e-8 * x.squaredNorm();

    nonneg_ok = nonneg_ok && apply_saab(bank, samples).minCoeff() >= 0.0;

    const SaabFilterBank again = fit_saab(samples, EnergyPolicy{1.0, {}});
    det_ok = det_ok && oracle::bitwise_equal(bank.ac_anchors, again.ac_anchors) && bank.bias == again.bias;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(2, "saab algebra properties over " + std::to_string(instances) + " random instances",
         gram_ok && energy_ok && nonneg_ok && det_ok && seconds < 30.0,
         std::string("gram ") + (gram_ok ? "ok" : "FAIL") + ", energy " + (energy_ok ? "ok" : "FAIL") +
             ", nonneg " + (nonneg_ok ? "ok" : "FAIL") + ", determinism " + (det_ok ? "ok" : "FAIL") +
             ", elapsed " + std::to_string(seconds) + "s");
}

void criterion_3_brute_force() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(31415);
  bool windows_ok = true, pool_ok = true, auc_ok = true, kmeans_ok = true, lsr_ok = true, eig_ok = true;

  for (int trial = 0; trial < 40; ++trial) {
    const int S = 2 + static_cast<int>(rng.index(7));
    const int K = 1 + static_cast<int>(rng.index(8));
    const int s = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(S)));
    const int k = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(K)));
    const Volume4D vol = oracle::random_volume(S, K, 1, 11000 + trial);
    const Eigen::MatrixXd mine = extract_windows(vol, WindowSpec{s, k});
    const auto expect = oracle::windows(vol, s, k);
    windows_ok = windows_ok && mine.rows() == static_cast<Eigen::Index>(expect.size());
    for (Eigen::Index r = 0; windows_ok && r < mine.rows(); ++r) {
      for (Eigen::Index c = 0; c < mine.cols(); ++c) {
        if (mine(r, c) != expect[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) windows_ok = false;
      }
    }
  }

  for (int trial = 0; trial < 40; ++trial) {
    const Volume4D vol = oracle::random_volume(8, 8, 1, 12000 + trial);
    pool_ok = pool_ok && maxpool(vol, PoolSpec{PoolMode::kHorizontalOnly, 1}).data ==
                             oracle::block_max(vol, 2, 1, 1).data;
    pool_ok = pool_ok && maxpool(vol, PoolSpec{PoolMode::kFull, 2}).data == oracle::block_max(vol, 2, 2, 2).data;
    pool_ok = pool_ok && aggregate_pool(vol, 4, 2, 2).data == oracle::block_max(vol, 4, 2, 2).data;
  }

  for (int trial = 0; trial < 30; ++trial) {
    const int n = 5 + static_cast<int>(rng.index(196));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      scores[static_cast<std::size_t>(j)] = static_cast<double>(rng.index(7));
      labels[static_cast<std::size_t>(j)] = static_cast<int>(rng.index(2));
    }
    labels[0] = 0;
    labels[1] = 1;
    auc_ok = auc_ok && std::abs(auc(scores, labels) - oracle::auc_pairwise(scores, labels)) <= 1e-8;
  }

  for (int trial = 0; trial < 12; ++trial) {
    const int J = 10 + static_cast<int>(rng.index(40));
    const int dims = 2 + static_cast<int>(rng.index(4));
    const int k = 2 + static_cast<int>(rng.index(3));
    const Eigen::MatrixXd points = oracle::random_matrix(J, dims, 13000 + trial);
    const KmeansResult mine = kmeans(points, k, 500 + trial);
    const Eigen::MatrixXd reference = oracle::kmeans_reference(points, k, 500 + trial);
    kmeans_ok = kmeans_ok && (mine.centers - reference).cwiseAbs().maxCoeff() <= 1e-8;
  }

  for (int trial = 0; trial < 12; ++trial) {
    const int J = 12 + static_cast<int>(rng.index(30));
    const Eigen::MatrixXd features = oracle::random_matrix(J, 3, 14000 + trial);
    std::vector<int> labels(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) labels[static_cast<std::size_t>(j)] = j % 2;
    const LagUnit unit = fit_lag(features, labels, 2, 10.0, 900 + trial);
    Eigen::MatrixXd targets(J, unit.m_prime());
    for (int j = 0; j < J; ++j) {
      targets.row(j) = prob_target(unit, features.row(j).transpose(), labels[static_cast<std::size_t>(j)]).transpose();
    }
    Eigen::MatrixXd design(J, 4);
    design.leftCols(3) = features;
    design.col(3).setOnes();
    const double mine = (design * unit.regression.transpose() - targets).norm();
    lsr_ok = lsr_ok && std::abs(mine - oracle::lsq_residual_svd(features, targets)) <= 1e-8;
  }

  // Eigenvector recovery up to sign at 1e-6.
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + static_cast<int>(rng.index(5));
    const Eigen::MatrixXd samples = oracle::random_matrix(80, n, 15000 + trial);
    const SaabFilterBank bank = fit_saab(samples, EnergyPolicy{1.0, {}});

    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    Eigen::MatrixXd residuals = samples;
    for (Eigen::Index j = 0; j < samples.rows(); ++j) {
      const double dc = samples.row(j).sum() * inv_sqrt_n;
      residuals.row(j) -= dc * inv_sqrt_n * Eigen::RowVectorXd::Ones(n);
    }
    const Eigen::RowVectorXd mean = residuals.colwise().mean();
    const Eigen::MatrixXd centered = residuals.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(samples.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (int f = 0; f + 1 < bank.F; ++f) {
      const Eigen::VectorXd expect = solver.eigenvectors().col(n - 1 - f);
      const double align = std::abs(bank.ac_anchors.row(f).dot(expect.transpose()));
      eig_ok = eig_ok && std::abs(align - 1.0) <= 1e-6;
    }
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = windows_ok && pool_ok && auc_ok && kmeans_ok && lsr_ok && eig_ok && seconds < 120.0;
  report(3, "windows/pooling/AUC/k-means/LSR/eigenvectors match brute-force oracles", ok,
         std::string("windows ") + (windows_ok ? "ok" : "FAIL") + ", pooling " + (pool_ok ? "ok" : "FAIL") +
             ", auc " + (auc_ok ? "ok" : "FAIL") + ", kmeans " + (kmeans_ok ? "ok" : "FAIL") + ", lsr " +
             (lsr_ok ? "ok" : "FAIL") + ", eig " + (eig_ok ? "ok" : "FAIL") + ", elapsed " +
             std::to_string(seconds) + "s");
}

void criterion_4_label_blindness() {
  SynthParams params = reduced_synth(0.8);
  params.n_controls = 8;
  params.n_patients = 8;
  const Dataset dataset = synth_dataset(params);
  Dataset shuffled = dataset;
  std::swap(shuffled.labels[0], shuffled.labels[shuffled.labels.size() - 1]);
  std::swap(shuffled.labels[2], shuffled.labels[10]);

  const RunConfig config = reduced_config();
  const TrainedModel a = fit(dataset, config, 0);
  const TrainedModel b = fit(shuffled, config, 0);
  bool ok = a.cascade.banks.size() == b.cascade.banks.size();
  for (std::size_t i = 0; ok && i < a.cascade.banks.size(); ++i) {
    for (std::size_t c = 0; ok && c < a.cascade.banks[i].per_channel.size(); ++c) {
      const SaabFilterBank& ba = a.cascade.banks[i].per_channel[c];
      const SaabFilterBank& bb = b.cascade.banks[i].per_channel[c];
      ok = ba.F == bb.F && ba.bias == bb.bias && oracle::bitwise_equal(ba.ac_anchors, bb.ac_anchors) &&
           oracle::bitwise_equal(ba.ac_eigenvalues, bb.ac_eigenvalues);
    }
  }
  report(4, "shuffling labels leaves all saab banks bitwise unchanged", ok);
}

void criterion_5_loo_purity() {
  SynthParams params = reduced_synth(0.8);
  params.n_controls = 5;
  params.n_patients = 5;
  const Dataset dataset = synth_dataset(params);

  RunConfig fold_config = reduced_config();
  fold_config.seed = Rng::derive(fold_config.seed, 0, 0);

  auto fit_without_first = [&](const Dataset& data) {
    Dataset rest;
    for (std::size_t j = 1; j < data.volumes.size(); ++j) {
      rest.volumes.push_back(data.volumes[j]);
      rest.labels.push_back(data.labels[j]);
    }
    std::stringstream buffer;
    save_model(fit(rest, fold_config, 0), buffer);
    return buffer.str();
  };

  const std::string before = fit_without_first(dataset);
  Dataset corrupted = dataset;
  Rng noise(777);
  for (double& v : corrupted.volumes[0].data) v = 100.0 * noise.normal();
  const std::string after = fit_without_first(corrupted);
  report(5, "corrupting the held-out sample leaves the fold's serialized model byte-identical",
         before == after, std::to_string(before.size()) + " bytes compared");
}

void criterion_6_end_to_end(bool full) {
  const auto t0 = std::chrono::steady_clock::now();

  const SynthParams params = full ? full_synth(0.8) : reduced_synth(0.8);
  const Dataset dataset = synth_dataset(params);
  const double oracle_auc = oracle_auc_on(params, dataset);

  RunConfig config = full ? five_stage_config() : reduced_config();
  const EvalReport report_signal = loocv(dataset, config, 0);

  const SynthParams null_params = full ? full_synth(0.0) : reduced_synth(0.0);
  const Dataset null_dataset = synth_dataset(null_params);
  const EvalReport report_null = loocv(null_dataset, config, 0);

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = oracle_auc >= 0.99 && report_signal.auc_mean >= 0.95 &&
                  report_signal.accuracy_mean >= 0.90 && report_null.auc_mean >= 0.35 &&
                  report_null.auc_mean <= 0.65 &&
                  (full ? seconds < 3600.0 : seconds < 300.0);
  report(6,
         std::string(full ? "full-size" : "reduced") +
             " synthetic end-to-end: oracle >= 0.99, loocv auc >= 0.95, accuracy >= 0.90, null auc in 0.5 +- 0.15",
         ok,
         "oracle_auc " + std::to_string(oracle_auc) + ", auc " + std::to_string(report_signal.auc_mean) +
             ", accuracy " + std::to_string(report_signal.accuracy_mean) + ", null_auc " +
             std::to_string(report_null.auc_mean) + ", elapsed " + std::to_string(seconds) + "s");
}

void criterion_7_parameter_accounting() {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthParams params = full_synth(0.8);
  const Dataset dataset = synth_dataset(params);
  const TrainedModel model = fit(dataset, five_stage_config(), 0);
  const ParamCounts counts = count_parameters(model);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_range = counts.total >= 30'000 && counts.total <= 400'000;
  const bool sums = counts.total == counts.saab + counts.lag + counts.classifier;
  report(7, "default full-size five-stage fit lands in [0.03M, 0.4M] parameters and the breakdown sums exactly",
         in_range && sums,
         "total " + std::to_string(counts.total) + " = saab " + std::to_string(counts.saab) + " + lag " +
             std::to_string(counts.lag) + " + classifier " + std::to_string(counts.classifier) +
             ", elapsed " + std::to_string(seconds) + "s");
}

void criterion_8_energy_sweep() {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthParams params = reduced_synth(0.8);
  const Dataset dataset = synth_dataset(params);

  const double thresholds[5] = {0.95, 0.96, 0.97, 0.98, 0.99};
  std::vector<std::vector<int>> counts;  // per threshold, per stage (summed over channels)
  std::vector<double> aucs;
  for (double t : thresholds) {
    RunConfig config = reduced_config();
    for (auto& st : config.stages) st.energy.threshold = t;
    const TrainedModel model = fit(dataset, config, 0);
    std::vector<int> per_stage;
    for (const auto& banks : model.cascade.banks) {
      int total = 0;
      for (const auto& bank : banks.per_channel) total += bank.F;
      per_stage.push_back(total);
    }
    counts.push_back(per_stage);
    aucs.push_back(loocv(dataset, config, 0).auc_mean);
  }

  bool monotone = true;
  for (std::size_t t = 1; t < counts.size(); ++t) {
    for (std::size_t i = 0; i < counts[t].size(); ++i) {
      if (counts[t][i] < counts[t - 1][i]) monotone = false;
    }
  }
  bool auc_stable = true;
  for (std::size_t t = 1; t < aucs.size(); ++t) {
    if (aucs[t] < aucs[t - 1] - 0.03) auc_stable = false;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string detail = "filters";
  for (const auto& per_stage : counts) {
    detail += " [";
    for (std::size_t i = 0; i < per_stage.size(); ++i) detail += (i ? "," : "") + std::to_string(per_stage[i]);
    detail += "]";
  }
  detail += ", auc";
  for (double a : aucs) detail += " " + std::to_string(a);
  detail += ", elapsed " + std::to_string(seconds) + "s";
  report(8, "energy thresholds 0.95..0.99: filter counts nondecreasing, auc never drops by > 0.03",
         monotone && auc_stable, detail);
}

void criterion_9_selection_sweep() {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthParams params = reduced_synth(0.8);
  const Dataset dataset = synth_dataset(params);

  const double fractions[5] = {0.1, 0.3, 0.5, 0.6, 1.0};
  std::vector<double> aucs;
  for (double f : fractions) {
    RunConfig config = reduced_config();
    config.keep_fraction = f;
    aucs.push_back(loocv(dataset, config, 0).auc_mean);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool plateau = std::abs(aucs[3] - aucs[4]) <= 0.02;
  std::string detail = "auc";
  for (double a : aucs) detail += " " + std::to_string(a);
  detail += ", elapsed " + std::to_string(seconds) + "s";
  report(9, "keep fractions 0.1..1.0: auc at 0.6 within 0.02 of auc at 1.0", plateau, detail);
}

void criterion_10_serialization() {
  SynthParams params = reduced_synth(0.8);
  params.n_controls = 5;
  params.n_patients = 5;
  const Dataset dataset = synth_dataset(params);
  const TrainedModel model = fit(dataset, reduced_config(), 0);

  std::stringstream buffer;
  save_model(model, buffer);
  std::stringstream in(buffer.str());
  const TrainedModel loaded = load_model(in);
  bool roundtrip = true;
  for (const Volume4D& vol : dataset.volumes) {
    if (predict(model, vol).score != predict(loaded, vol).score) roundtrip = false;
  }

  bool rejected = true;
  Rng rng(31);
  const std::string bytes = buffer.str();
  for (int trial = 0; trial < 25; ++trial) {
    std::string corrupt = bytes;
    const std::size_t pos = rng.index(corrupt.size());
    corrupt[pos] = static_cast<char>(corrupt[pos] ^ (1 << rng.index(8)));
    std::stringstream cin_(corrupt);
    try {
      (void)load_model(cin_);
      rejected = false;
    } catch (const IoError&) {
    }
  }
  report(10, "save/load round-trips bitwise and corrupted files are rejected by checksum",
         roundtrip && rejected);
}

}  // namespace

int main(int argc, char** argv) {
  bool full = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--full") == 0) full = true;
  }

  criterion_1_shape_oracle();
  criterion_2_saab_algebra();
  criterion_3_brute_force();
  criterion_4_label_blindness();
  criterion_5_loo_purity();
  criterion_6_end_to_end(false);
  if (full) criterion_6_end_to_end(true);
  criterion_7_parameter_accounting();
  criterion_8_energy_sweep();
  criterion_9_selection_sweep();
  criterion_10_serialization();

  if (g_failures > 0) {
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all criteria passed" << std::endl;
  return 0;
}
