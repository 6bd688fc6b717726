#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace voxelhop {

// Dense multi-channel 3D volume, row-major over (s1, s2, k, c). The two
// horizontal dimensions are equal by construction (square horizontal plane);
// k is the vertical dimension, c the channel dimension.
struct Volume4D {
  int s = 0;
  int k = 0;
  int c = 0;
  std::vector<double> data;

  Volume4D() = default;
  Volume4D(int s_, int k_, int c_) : s(s_), k(k_), c(c_), data(static_cast<std::size_t>(s_) * s_ * k_ * c_, 0.0) {}

  static Volume4D zeros(int s, int k, int c) { return Volume4D(s, k, c); }

  std::size_t size() const { return data.size(); }

  std::size_t offset(int i1, int i2, int ik, int ic) const {
    return ((static_cast<std::size_t>(i1) * s + i2) * k + ik) * c + ic;
  }

  double at(int i1, int i2, int ik, int ic = 0) const { return data[offset(i1, i2, ik, ic)]; }
  double& at(int i1, int i2, int ik, int ic = 0) { return data[offset(i1, i2, ik, ic)]; }

  // Throws ShapeError/DataError when the invariants do not hold.
  void validate() const;
};

// s x s x k sliding window, stride 1.
struct WindowSpec {
  int s = 1;
  int k = 1;
};

enum class PoolMode {
  kHorizontalOnly,  // (2x2x1) -> (1x1x1)
  kFull,            // (2x2x2F) -> (1x1xF)
};

struct PoolSpec {
  PoolMode mode = PoolMode::kHorizontalOnly;
  int group = 1;  // vertical group width F (full mode only)
};

// Copies one channel out of a multi-channel volume into a C=1 slab.
Volume4D channel_slab(const Volume4D& vol, int channel);

// Number of window placements for the given spec. k_step > 1 slides the
// vertical origin in steps of k_step (used for group-aligned windows where
// the vertical axis carries F values per spatial position).
std::size_t window_rows(const Volume4D& vol, const WindowSpec& spec, int k_step = 1);

// Fills rows [row0, row1) of the window matrix into `out` (out has
// row1-row0 rows and s*s*k columns). Row r corresponds to the window origin
// enumerated lexicographically in (s1, s2, k); each row is the window
// flattened in the same order.
void extract_window_rows(const Volume4D& vol, const WindowSpec& spec, int k_step,
                         std::size_t row0, std::size_t row1, Eigen::Ref<Eigen::MatrixXd> out);

// Full window matrix, rows = (S-s+1)^2 * (K-k+1) when k_step == 1.
Eigen::MatrixXd extract_windows(const Volume4D& vol, const WindowSpec& spec, int k_step = 1);

// Non-overlapping max pooling of a single-channel slab. No padding: pooled
// dimensions must divide exactly or a ShapeError is thrown.
Volume4D maxpool(const Volume4D& vol, const PoolSpec& spec);

// Aggregation pooling: max over ratio_h x ratio_h x ratio_v blocks, where the
// vertical blocks are counted in groups of `group` values (the per-filter
// channel structure is preserved). Output is (S/ratio_h, S/ratio_h, K/ratio_v).
// Ratios must be >= 2; a ratio of 1 only arises internally when a global max
// is requested over an axis whose extent is already 1.
Volume4D aggregate_pool(const Volume4D& vol, int ratio_h, int ratio_v, int group);
Volume4D detail_block_max(const Volume4D& vol, int ratio_h, int ratio_v, int group);

}  // namespace voxelhop
