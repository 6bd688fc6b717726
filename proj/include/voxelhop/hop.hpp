#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "voxelhop/saab.hpp"
#include "voxelhop/tensor.hpp"

namespace voxelhop {

enum class StagePool {
  kHorizontal,  // (2x2x1) -> (1x1x1)
  kFull,        // (2x2x2F) -> (1x1xF)
  kNone,        // last stage
};

// One VoxelHop stage: an s x s x v window (v counted in output vectors of
// the previous stage), a Saab transform per channel, and the pooling that
// feeds the next stage.
struct StageConfig {
  int s = 3;
  int v = 3;
  EnergyPolicy energy;
  StagePool pool = StagePool::kNone;
  std::optional<long long> fit_row_cap;  // deterministic row subsampling for bank fitting
};

// Aggregation block size for one stage (Module 2). h/v == 0 means a global
// max over that axis.
struct AggSpec {
  int h = 2;
  int v = 2;
  bool global_h() const { return h == 0; }
  bool global_v() const { return v == 0; }
};

struct StageBanks {
  std::vector<SaabFilterBank> per_channel;
};

// Fitted Module 1: per-stage configs plus per-channel filter banks.
struct HopCascade {
  int channels = 0;
  int s0 = 0;
  int k0 = 0;
  std::vector<StageConfig> configs;
  std::vector<StageBanks> banks;  // parallel to configs

  int stage_count() const { return static_cast<int>(configs.size()); }
};

// Symbolic per-stage dimension trace. Vertical extents are in vector units;
// the raw vertical size is v * F_i with F_i data-dependent.
struct PlanStage {
  int stage = 0;  // 1-based
  int s_in = 0, v_in = 0;
  int s_out = 0, v_out = 0;  // pre-pool attribute dims
  StagePool pool = StagePool::kNone;
  int s_pooled = 0, v_pooled = 0;
  int agg_p = 0, agg_qv = 0;  // aggregated dims (0 when no aggregation spec given)
};

struct PlanReport {
  bool ok = true;
  int first_illegal_stage = 0;  // 1-based, 0 when legal
  std::string reason;
  std::vector<PlanStage> stages;
};

// Validates a stage schedule against input dims without touching any data.
// `aggregation` may be empty to skip Module 2 checks; otherwise it must have
// one entry per stage.
PlanReport plan_shapes(int s0, int k0, int channels, const std::vector<StageConfig>& configs,
                       const std::vector<AggSpec>& aggregation);

// Fits one bank per channel on windows pooled across all training samples.
// inputs[j][c] is sample j's channel-c slab; prev_groups[c] is the vector
// width of channel c's input (1 at stage 1, F_{i-1} afterwards).
StageBanks fit_stage_banks(const std::vector<std::vector<Volume4D>>& inputs, const StageConfig& cfg,
                           const std::vector<int>& prev_groups, int threads);

// Transforms one channel slab into its pre-pool attribute tensor
// S_out x S_out x (V_out * F).
Volume4D apply_stage_channel(const SaabFilterBank& bank, const Volume4D& slab, const StageConfig& cfg,
                             int prev_group);

// Applies the configured pooling (identity for StagePool::kNone).
Volume4D pool_stage_output(const Volume4D& attr, const StageConfig& cfg, int group);

// Convenience wrapper used by tests and small-scale callers: fits banks and
// returns both the pre-pool attributes and the pooled outputs per sample.
struct StageResult {
  StageBanks banks;
  std::vector<std::vector<Volume4D>> attributes;  // [sample][channel]
  std::vector<std::vector<Volume4D>> pooled;      // [sample][channel]
};
StageResult fit_stage(const std::vector<std::vector<Volume4D>>& inputs, const StageConfig& cfg,
                      const std::vector<int>& prev_groups, int threads);

// Runs a fitted cascade on one sample; returns the pre-pool attribute slabs
// for every stage and channel.
std::vector<std::vector<Volume4D>> apply_cascade(const HopCascade& cascade, const Volume4D& x,
                                                 int threads);

}  // namespace voxelhop
