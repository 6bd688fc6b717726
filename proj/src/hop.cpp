#include "voxelhop/hop.hpp"

#include <algorithm>
#include <memory>
#include <string>

#include "voxelhop/errors.hpp"
#include "voxelhop/threading.hpp"

namespace voxelhop {

namespace {

Eigen::Index chunk_rows_for(int cols) {
  const Eigen::Index target = 4'000'000 / std::max(1, cols);  // ~32 MB of doubles
  return std::clamp<Eigen::Index>(target, 1024, 65536);
}

void check_slab(const Volume4D& slab, const StageConfig& cfg, int prev_group) {
  if (slab.c != 1) throw ShapeError("stage input must be a single-channel slab");
  if (prev_group < 1 || slab.k % prev_group != 0) {
    throw ShapeError("slab vertical extent " + std::to_string(slab.k) +
                     " is not a multiple of the input vector width " + std::to_string(prev_group));
  }
  const int v_in = slab.k / prev_group;
  if (cfg.s > slab.s || cfg.v > v_in) {
    throw ShapeError("stage window " + std::to_string(cfg.s) + "x" + std::to_string(cfg.s) + "x" +
                     std::to_string(cfg.v) + " does not fit input " + std::to_string(slab.s) + "x" +
                     std::to_string(slab.s) + "x" + std::to_string(v_in) + " (vector units)");
  }
}

}  // namespace

PlanReport plan_shapes(int s0, int k0, int channels, const std::vector<StageConfig>& configs,
                       const std::vector<AggSpec>& aggregation) {
  PlanReport report;
  if (!aggregation.empty() && aggregation.size() != configs.size()) {
    report.ok = false;
    report.first_illegal_stage = 1;
    report.reason = "aggregation spec count does not match stage count";
    return report;
  }
  if (s0 < 1 || k0 < 1 || channels < 1) {
    report.ok = false;
    report.first_illegal_stage = 1;
    report.reason = "input dims must be >= 1";
    return report;
  }

  int s_in = s0;
  int v_in = k0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const StageConfig& cfg = configs[i];
    PlanStage st;
    st.stage = static_cast<int>(i) + 1;
    st.s_in = s_in;
    st.v_in = v_in;
    st.pool = cfg.pool;

    auto fail = [&](const std::string& why) {
      report.ok = false;
      report.first_illegal_stage = st.stage;
      report.reason = "stage " + std::to_string(st.stage) + ": " + why;
      report.stages.push_back(st);
    };

    if (cfg.s < 1 || cfg.v < 1) {
      fail("window sizes must be >= 1");
      return report;
    }
    if (cfg.s > s_in || cfg.v > v_in) {
      fail("window " + std::to_string(cfg.s) + "x" + std::to_string(cfg.s) + "x" + std::to_string(cfg.v) +
           " larger than input " + std::to_string(s_in) + "x" + std::to_string(s_in) + "x" +
           std::to_string(v_in));
      return report;
    }
    st.s_out = s_in - cfg.s + 1;
    st.v_out = v_in - cfg.v + 1;

    switch (cfg.pool) {
      case StagePool::kHorizontal:
        if (st.s_out % 2 != 0) {
          fail("horizontal maxpool needs an even horizontal extent, got " + std::to_string(st.s_out));
          return report;
        }
        st.s_pooled = st.s_out / 2;
        st.v_pooled = st.v_out;
        break;
      case StagePool::kFull:
        if (st.s_out % 2 != 0 || st.v_out % 2 != 0) {
          fail("full maxpool needs even extents, got " + std::to_string(st.s_out) + "x" +
               std::to_string(st.v_out));
          return report;
        }
        st.s_pooled = st.s_out / 2;
        st.v_pooled = st.v_out / 2;
        break;
      case StagePool::kNone:
        st.s_pooled = st.s_out;
        st.v_pooled = st.v_out;
        break;
    }

    if (!aggregation.empty()) {
      const AggSpec& agg = aggregation[i];
      if (agg.global_h()) {
        st.agg_p = 1;
      } else if (agg.h >= 2 && st.s_out % agg.h == 0) {
        st.agg_p = st.s_out / agg.h;
      } else {
        fail("aggregation ratio " + std::to_string(agg.h) + " does not divide horizontal extent " +
             std::to_string(st.s_out));
        return report;
      }
      if (agg.global_v()) {
        st.agg_qv = 1;
      } else if (agg.v >= 2 && st.v_out % agg.v == 0) {
        st.agg_qv = st.v_out / agg.v;
      } else {
        fail("aggregation ratio " + std::to_string(agg.v) + " does not divide vertical extent " +
             std::to_string(st.v_out));
        return report;
      }
    }

    report.stages.push_back(st);
    s_in = st.s_pooled;
    v_in = st.v_pooled;
  }
  return report;
}

StageBanks fit_stage_banks(const std::vector<std::vector<Volume4D>>& inputs, const StageConfig& cfg,
                           const std::vector<int>& prev_groups, int threads) {
  if (inputs.empty()) throw DataError("stage fitting needs at least one sample");
  const std::size_t channels = prev_groups.size();
  for (const auto& sample : inputs) {
    if (sample.size() != channels) throw ShapeError("samples disagree on channel count");
  }

  StageBanks banks;
  banks.per_channel.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const int group = prev_groups[c];
    const Volume4D& first = inputs[0][c];
    check_slab(first, cfg, group);
    for (const auto& sample : inputs) {
      if (sample[c].s != first.s || sample[c].k != first.k) {
        throw ShapeError("samples disagree on input dims");
      }
    }

    const WindowSpec spec{cfg.s, cfg.v * group};
    const int cols = spec.s * spec.s * spec.k;

    std::vector<std::unique_ptr<SaabAccumulator>> partial(inputs.size());
    parallel_for(inputs.size(), threads, [&](std::size_t j) {
      auto acc = std::make_unique<SaabAccumulator>(cols);
      const Volume4D& slab = inputs[j][c];
      const std::size_t rows = window_rows(slab, spec, group);
      long long stride = 1;
      if (cfg.fit_row_cap && static_cast<long long>(rows) > *cfg.fit_row_cap && *cfg.fit_row_cap > 0) {
        stride = (static_cast<long long>(rows) + *cfg.fit_row_cap - 1) / *cfg.fit_row_cap;
      }
      if (stride == 1) {
        const Eigen::Index chunk = chunk_rows_for(cols);
        Eigen::MatrixXd buf;
        for (std::size_t r0 = 0; r0 < rows; r0 += static_cast<std::size_t>(chunk)) {
          const std::size_t r1 = std::min(rows, r0 + static_cast<std::size_t>(chunk));
          buf.resize(static_cast<Eigen::Index>(r1 - r0), cols);
          extract_window_rows(slab, spec, group, r0, r1, buf);
          acc->add(buf);
        }
      } else {
        Eigen::MatrixXd buf(1, cols);
        for (std::size_t r = 0; r < rows; r += static_cast<std::size_t>(stride)) {
          extract_window_rows(slab, spec, group, r, r + 1, buf);
          acc->add(buf);
        }
      }
      partial[j] = std::move(acc);
    });

    SaabAccumulator total(cols);
    for (const auto& acc : partial) total.merge(*acc);
    banks.per_channel[c] = total.finalize(cfg.energy);
  }
  return banks;
}

Volume4D apply_stage_channel(const SaabFilterBank& bank, const Volume4D& slab, const StageConfig& cfg,
                             int prev_group) {
  check_slab(slab, cfg, prev_group);
  const WindowSpec spec{cfg.s, cfg.v * prev_group};
  if (spec.s * spec.s * spec.k != bank.n) throw ShapeError("bank dimension does not match stage window");

  const int s_out = slab.s - cfg.s + 1;
  const int v_out = slab.k / prev_group - cfg.v + 1;
  const int F = bank.F;
  Volume4D out(s_out, v_out * F, 1);

  const std::size_t rows = window_rows(slab, spec, prev_group);
  const Eigen::Index chunk = chunk_rows_for(bank.n);
  Eigen::MatrixXd buf;
  for (std::size_t r0 = 0; r0 < rows; r0 += static_cast<std::size_t>(chunk)) {
    const std::size_t r1 = std::min(rows, r0 + static_cast<std::size_t>(chunk));
    buf.resize(static_cast<Eigen::Index>(r1 - r0), bank.n);
    extract_window_rows(slab, spec, prev_group, r0, r1, buf);
    const Eigen::MatrixXd y = apply_saab(bank, buf);
    // Row r is the window at origin (o1, o2, ok); its F responses land at
    // vertical indices ok*F .. ok*F+F-1 of the output cell (o1, o2).
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const std::size_t r = r0 + static_cast<std::size_t>(i);
      const std::size_t ok = r % static_cast<std::size_t>(v_out);
      const std::size_t o2 = (r / v_out) % static_cast<std::size_t>(s_out);
      const std::size_t o1 = r / (static_cast<std::size_t>(v_out) * s_out);
      double* dst = out.data.data() + ((o1 * s_out + o2) * out.k + ok * F);
      for (int f = 0; f < F; ++f) dst[f] = y(i, f);
    }
  }
  return out;
}

Volume4D pool_stage_output(const Volume4D& attr, const StageConfig& cfg, int group) {
  switch (cfg.pool) {
    case StagePool::kHorizontal:
      return maxpool(attr, PoolSpec{PoolMode::kHorizontalOnly, 1});
    case StagePool::kFull:
      return maxpool(attr, PoolSpec{PoolMode::kFull, group});
    case StagePool::kNone:
      return attr;
  }
  throw ConfigError("unknown pool mode");
}

StageResult fit_stage(const std::vector<std::vector<Volume4D>>& inputs, const StageConfig& cfg,
                      const std::vector<int>& prev_groups, int threads) {
  StageResult result;
  result.banks = fit_stage_banks(inputs, cfg, prev_groups, threads);
  const std::size_t channels = prev_groups.size();
  result.attributes.resize(inputs.size());
  result.pooled.resize(inputs.size());
  parallel_for(inputs.size(), threads, [&](std::size_t j) {
    result.attributes[j].resize(channels);
    result.pooled[j].resize(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      const SaabFilterBank& bank = result.banks.per_channel[c];
      Volume4D attr = apply_stage_channel(bank, inputs[j][c], cfg, prev_groups[c]);
      result.pooled[j][c] = pool_stage_output(attr, cfg, bank.F);
      result.attributes[j][c] = std::move(attr);
    }
  });
  return result;
}

std::vector<std::vector<Volume4D>> apply_cascade(const HopCascade& cascade, const Volume4D& x,
                                                 int threads) {
  if (x.s != cascade.s0 || x.k != cascade.k0 || x.c != cascade.channels) {
    throw ShapeError("input dims " + std::to_string(x.s) + "x" + std::to_string(x.s) + "x" +
                     std::to_string(x.k) + "x" + std::to_string(x.c) + " do not match training dims " +
                     std::to_string(cascade.s0) + "x" + std::to_string(cascade.s0) + "x" +
                     std::to_string(cascade.k0) + "x" + std::to_string(cascade.channels));
  }
  if (cascade.banks.size() != cascade.configs.size()) throw ConfigError("cascade is not fitted");

  std::vector<Volume4D> current(cascade.channels);
  for (int c = 0; c < cascade.channels; ++c) current[c] = channel_slab(x, c);

  std::vector<std::vector<Volume4D>> attrs(cascade.configs.size());
  std::vector<int> groups(cascade.channels, 1);
  for (std::size_t i = 0; i < cascade.configs.size(); ++i) {
    const StageConfig& cfg = cascade.configs[i];
    attrs[i].resize(cascade.channels);
    std::vector<Volume4D> next(cascade.channels);
    parallel_for(static_cast<std::size_t>(cascade.channels), threads, [&](std::size_t c) {
      const SaabFilterBank& bank = cascade.banks[i].per_channel[c];
      Volume4D attr = apply_stage_channel(bank, current[c], cfg, groups[c]);
      next[c] = pool_stage_output(attr, cfg, bank.F);
      attrs[i][c] = std::move(attr);
    });
    for (int c = 0; c < cascade.channels; ++c) groups[c] = cascade.banks[i].per_channel[c].F;
    current = std::move(next);
  }
  return attrs;
}

}  // namespace voxelhop
