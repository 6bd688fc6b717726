#include "voxelhop/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "voxelhop/errors.hpp"

namespace voxelhop {

void Volume4D::validate() const {
  if (s < 1 || k < 1 || c < 1) {
    throw ShapeError("volume dims must be >= 1, got " + std::to_string(s) + "x" + std::to_string(s) +
                     "x" + std::to_string(k) + "x" + std::to_string(c));
  }
  if (data.size() != static_cast<std::size_t>(s) * s * k * c) {
    throw ShapeError("volume payload length does not match dims");
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw DataError("volume contains non-finite values");
  }
}

Volume4D channel_slab(const Volume4D& vol, int channel) {
  if (channel < 0 || channel >= vol.c) throw ShapeError("channel index out of range");
  Volume4D out(vol.s, vol.k, 1);
  const std::size_t plane = static_cast<std::size_t>(vol.s) * vol.s * vol.k;
  for (std::size_t i = 0; i < plane; ++i) out.data[i] = vol.data[i * vol.c + channel];
  return out;
}

namespace {

void check_window(const Volume4D& vol, const WindowSpec& spec, int k_step) {
  if (vol.c != 1) throw ShapeError("window extraction expects a single-channel slab");
  if (spec.s < 1 || spec.k < 1 || k_step < 1) throw ShapeError("window spec fields must be >= 1");
  if (spec.s > vol.s || spec.k > vol.k) {
    throw ShapeError("window " + std::to_string(spec.s) + "x" + std::to_string(spec.s) + "x" +
                     std::to_string(spec.k) + " larger than volume " + std::to_string(vol.s) + "x" +
                     std::to_string(vol.s) + "x" + std::to_string(vol.k));
  }
}

}  // namespace

std::size_t window_rows(const Volume4D& vol, const WindowSpec& spec, int k_step) {
  check_window(vol, spec, k_step);
  const std::size_t nh = static_cast<std::size_t>(vol.s - spec.s + 1);
  const std::size_t nk = static_cast<std::size_t>((vol.k - spec.k) / k_step + 1);
  return nh * nh * nk;
}

void extract_window_rows(const Volume4D& vol, const WindowSpec& spec, int k_step,
                         std::size_t row0, std::size_t row1, Eigen::Ref<Eigen::MatrixXd> out) {
  check_window(vol, spec, k_step);
  const std::size_t nh = static_cast<std::size_t>(vol.s - spec.s + 1);
  const std::size_t nk = static_cast<std::size_t>((vol.k - spec.k) / k_step + 1);
  const int cols = spec.s * spec.s * spec.k;
  if (out.rows() != static_cast<Eigen::Index>(row1 - row0) || out.cols() != cols) {
    throw ShapeError("window output buffer has wrong shape");
  }

  for (std::size_t r = row0; r < row1; ++r) {
    const std::size_t ok = r % nk;
    const std::size_t o2 = (r / nk) % nh;
    const std::size_t o1 = r / (nk * nh);
    const int k0 = static_cast<int>(ok) * k_step;
    Eigen::Index col = 0;
    for (int d1 = 0; d1 < spec.s; ++d1) {
      for (int d2 = 0; d2 < spec.s; ++d2) {
        const std::size_t base =
            (static_cast<std::size_t>(o1 + d1) * vol.s + (o2 + d2)) * vol.k + k0;
        for (int dk = 0; dk < spec.k; ++dk) {
          out(static_cast<Eigen::Index>(r - row0), col++) = vol.data[base + dk];
        }
      }
    }
  }
}

Eigen::MatrixXd extract_windows(const Volume4D& vol, const WindowSpec& spec, int k_step) {
  const std::size_t rows = window_rows(vol, spec, k_step);
  Eigen::MatrixXd out(rows, spec.s * spec.s * spec.k);
  extract_window_rows(vol, spec, k_step, 0, rows, out);
  return out;
}

Volume4D maxpool(const Volume4D& vol, const PoolSpec& spec) {
  if (vol.c != 1) throw ShapeError("maxpool expects a single-channel slab");
  if (vol.s % 2 != 0) throw ShapeError("maxpool requires an even horizontal extent, got " + std::to_string(vol.s));

  if (spec.mode == PoolMode::kHorizontalOnly) {
    Volume4D out(vol.s / 2, vol.k, 1);
    for (int p1 = 0; p1 < out.s; ++p1) {
      for (int p2 = 0; p2 < out.s; ++p2) {
        for (int ik = 0; ik < vol.k; ++ik) {
          out.at(p1, p2, ik) = std::max(std::max(vol.at(2 * p1, 2 * p2, ik), vol.at(2 * p1, 2 * p2 + 1, ik)),
                                        std::max(vol.at(2 * p1 + 1, 2 * p2, ik), vol.at(2 * p1 + 1, 2 * p2 + 1, ik)));
        }
      }
    }
    return out;
  }

  const int group = spec.group;
  if (group < 1) throw ShapeError("pool group must be >= 1");
  if (vol.k % (2 * group) != 0) {
    throw ShapeError("full maxpool requires the vertical extent (" + std::to_string(vol.k) +
                     ") to divide by 2*group (" + std::to_string(2 * group) + ")");
  }
  Volume4D out(vol.s / 2, vol.k / 2, 1);
  const int out_groups = vol.k / (2 * group);
  for (int p1 = 0; p1 < out.s; ++p1) {
    for (int p2 = 0; p2 < out.s; ++p2) {
      for (int g = 0; g < out_groups; ++g) {
        for (int f = 0; f < group; ++f) {
          double m = vol.at(2 * p1, 2 * p2, 2 * g * group + f);
          for (int d1 = 0; d1 < 2; ++d1) {
            for (int d2 = 0; d2 < 2; ++d2) {
              for (int j = 0; j < 2; ++j) {
                m = std::max(m, vol.at(2 * p1 + d1, 2 * p2 + d2, (2 * g + j) * group + f));
              }
            }
          }
          out.at(p1, p2, g * group + f) = m;
        }
      }
    }
  }
  return out;
}

Volume4D aggregate_pool(const Volume4D& vol, int ratio_h, int ratio_v, int group) {
  if (ratio_h < 2 || ratio_v < 2) throw ShapeError("aggregation ratios must be >= 2");
  return detail_block_max(vol, ratio_h, ratio_v, group);
}

Volume4D detail_block_max(const Volume4D& vol, int ratio_h, int ratio_v, int group) {
  if (vol.c != 1) throw ShapeError("aggregate_pool expects a single-channel slab");
  if (ratio_h < 1 || ratio_v < 1) throw ShapeError("aggregation ratios must be >= 1");
  if (group < 1) throw ShapeError("group must be >= 1");
  if (vol.s % ratio_h != 0) {
    throw ShapeError("horizontal extent " + std::to_string(vol.s) + " not divisible by ratio " +
                     std::to_string(ratio_h));
  }
  if (vol.k % group != 0 || (vol.k / group) % ratio_v != 0) {
    throw ShapeError("vertical spatial extent " + std::to_string(vol.k) + "/" + std::to_string(group) +
                     " not divisible by ratio " + std::to_string(ratio_v));
  }

  const int P = vol.s / ratio_h;
  const int in_groups = vol.k / group;
  const int out_groups = in_groups / ratio_v;
  Volume4D out(P, vol.k / ratio_v, 1);
  for (int p1 = 0; p1 < P; ++p1) {
    for (int p2 = 0; p2 < P; ++p2) {
      for (int g = 0; g < out_groups; ++g) {
        for (int f = 0; f < group; ++f) {
          double m = vol.at(p1 * ratio_h, p2 * ratio_h, g * ratio_v * group + f);
          for (int d1 = 0; d1 < ratio_h; ++d1) {
            for (int d2 = 0; d2 < ratio_h; ++d2) {
              for (int j = 0; j < ratio_v; ++j) {
                m = std::max(m, vol.at(p1 * ratio_h + d1, p2 * ratio_h + d2, (g * ratio_v + j) * group + f));
              }
            }
          }
          out.at(p1, p2, g * group + f) = m;
        }
      }
    }
  }
  return out;
}

}  // namespace voxelhop
