#pragma once

#include <cstdint>

#include "voxelhop/model.hpp"
#include "voxelhop/tensor.hpp"

namespace voxelhop {

// Synthetic stand-in for registration-derived deformation fields: controls
// are smooth random displacement fields (a sum of Gaussian bumps per
// channel); patients get an additional localized radial contraction pattern
// at a fixed ROI, mimicking atrophy. Fully deterministic per seed via the
// counter-based generator.
struct SynthParams {
  int n_controls = 20;
  int n_patients = 26;
  int s = 110;
  int k = 30;
  int c = 3;
  double signal_amplitude = 0.8;      // planted contraction strength (0 => null dataset)
  double background_amplitude = 1.0;  // scale of the smooth random background
  double noise_sigma = 0.001;         // iid voxel noise on both classes
  int bumps = 8;                  // background bumps per channel
  std::uint64_t seed = 1;
};

// sample_index enumerates the whole dataset (controls first).
Volume4D synth_volume(const SynthParams& params, int sample_index, bool patient);

Dataset synth_dataset(const SynthParams& params);

// Profile-weighted mean inward displacement along the contraction's main
// axis over the planted ROI; the linear oracle for dataset calibration.
// Larger means more contraction (patient-like).
double planted_roi_score(const SynthParams& params, const Volume4D& vol);

}  // namespace voxelhop
