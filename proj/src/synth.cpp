#include "voxelhop/synth.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "voxelhop/errors.hpp"
#include "voxelhop/rng.hpp"

namespace voxelhop {

namespace {

struct Roi {
  double c1, c2, ck;      // center
  double sh, sv;          // horizontal / vertical widths
};

Roi roi_for(const SynthParams& p) {
  Roi roi;
  roi.c1 = 0.40 * p.s;
  roi.c2 = 0.60 * p.s;
  roi.ck = 0.50 * p.k;
  roi.sh = p.s / 6.0;
  roi.sv = std::max(p.k / 6.0, 1.0);
  return roi;
}

}  // namespace

Volume4D synth_volume(const SynthParams& p, int sample_index, bool patient) {
  if (p.s < 1 || p.k < 1 || p.c < 1) throw ConfigError("synth dims must be >= 1");

  Volume4D vol(p.s, p.k, p.c);
  Rng rng(Rng::derive(p.seed, 0x73796e7468ULL, static_cast<std::uint64_t>(sample_index)));

  // Smooth background: per channel, a sum of anisotropic Gaussian bumps.
  // The short axis is ~S/6; the other horizontal axis and the vertical axis
  // are much broader, giving fields that vary mostly along one direction the
  // way registration fields do along the head-foot axis. The compact window
  // spectra this produces keep the 98%-energy filter counts small.
  for (int c = 0; c < p.c; ++c) {
    for (int g = 0; g < p.bumps; ++g) {
      const double b1 = rng.uniform(0.0, p.s);
      const double b2 = rng.uniform(0.0, p.s);
      const double bk = rng.uniform(0.0, p.k);
      const double s1w = (p.s / 6.0) * rng.uniform(0.8, 1.3);
      const double s2w = p.s * rng.uniform(1.5, 2.5);
      const double sv = p.k * rng.uniform(3.0, 5.0);
      const double amp = p.background_amplitude * rng.uniform(-1.0, 1.0);
      const double inv2s1 = 1.0 / (2.0 * s1w * s1w);
      const double inv2s2 = 1.0 / (2.0 * s2w * s2w);
      const double inv2sv = 1.0 / (2.0 * sv * sv);
      for (int i1 = 0; i1 < p.s; ++i1) {
        const double d1 = (i1 - b1) * (i1 - b1) * inv2s1;
        if (d1 >= 14.0) continue;
        for (int i2 = 0; i2 < p.s; ++i2) {
          const double d12 = d1 + (i2 - b2) * (i2 - b2) * inv2s2;
          for (int ik = 0; ik < p.k; ++ik) {
            const double e = d12 + (ik - bk) * (ik - bk) * inv2sv;
            if (e < 14.0) vol.at(i1, i2, ik, c) += amp * std::exp(-e);
          }
        }
      }
    }
  }

  // Planted signal: an anisotropic contraction (displacement pointing toward
  // the ROI center, strongest along the vertical axis) written into the
  // channels as x/y/z displacement components. The backgrounds are nearly
  // flat along k, so the vertical component carries most of the detectable
  // class difference.
  if (patient && p.signal_amplitude != 0.0) {
    const Roi roi = roi_for(p);
    const double inv2sh = 1.0 / (2.0 * roi.sh * roi.sh);
    const double inv2sv = 1.0 / (2.0 * roi.sv * roi.sv);
    for (int i1 = 0; i1 < p.s; ++i1) {
      const double d1 = i1 - roi.c1;
      for (int i2 = 0; i2 < p.s; ++i2) {
        const double d2 = i2 - roi.c2;
        for (int ik = 0; ik < p.k; ++ik) {
          const double dk = ik - roi.ck;
          const double e = (d1 * d1 + d2 * d2) * inv2sh + dk * dk * inv2sv;
          if (e >= 12.0) continue;
          const double w = p.signal_amplitude * std::exp(-e);
          vol.at(i1, i2, ik, 0) += -0.3 * w * d1 / roi.sh;
          if (p.c > 1) vol.at(i1, i2, ik, 1) += -0.3 * w * d2 / roi.sh;
          if (p.c > 2) vol.at(i1, i2, ik, 2) += -w * dk / roi.sv;
        }
      }
    }
  }

  if (p.noise_sigma > 0.0) {
    for (double& v : vol.data) v += p.noise_sigma * rng.normal();
  }
  return vol;
}

Dataset synth_dataset(const SynthParams& p) {
  if (p.n_controls < 0 || p.n_patients < 0) throw ConfigError("sample counts must be >= 0");
  Dataset dataset;
  const int total = p.n_controls + p.n_patients;
  dataset.volumes.reserve(total);
  for (int j = 0; j < total; ++j) {
    const bool patient = j >= p.n_controls;
    dataset.volumes.push_back(synth_volume(p, j, patient));
    dataset.labels.push_back(patient ? 1 : 0);
    dataset.ids.push_back((patient ? "patient_" : "control_") + std::to_string(patient ? j - p.n_controls : j));
  }
  return dataset;
}

double planted_roi_score(const SynthParams& p, const Volume4D& vol) {
  const Roi roi = roi_for(p);
  double acc = 0.0;
  double weight = 0.0;
  const int r1 = static_cast<int>(std::ceil(2.0 * roi.sh));
  const int rk = static_cast<int>(std::ceil(2.0 * roi.sv));
  for (int i1 = std::max(0, static_cast<int>(roi.c1) - r1); i1 <= std::min(p.s - 1, static_cast<int>(roi.c1) + r1); ++i1) {
    for (int i2 = std::max(0, static_cast<int>(roi.c2) - r1); i2 <= std::min(p.s - 1, static_cast<int>(roi.c2) + r1); ++i2) {
      for (int ik = std::max(0, static_cast<int>(roi.ck) - rk); ik <= std::min(p.k - 1, static_cast<int>(roi.ck) + rk); ++ik) {
        const double d1 = i1 - roi.c1;
        const double d2 = i2 - roi.c2;
        const double dk = ik - roi.ck;
        const double norm = std::sqrt(d1 * d1 + d2 * d2 + dk * dk);
        if (norm < 1e-9) continue;
        // Inward displacement along the contraction's dominant (vertical)
        // axis, weighted by the ROI profile. The background fields are
        // nearly flat along k, so this projection isolates the planted
        // pattern.
        const double w =
            std::exp(-((d1 * d1 + d2 * d2) / (2.0 * roi.sh * roi.sh) + dk * dk / (2.0 * roi.sv * roi.sv)));
        const double inward = p.c > 2 ? -(vol.at(i1, i2, ik, 2) * dk) : -(vol.at(i1, i2, ik, 0) * d1);
        acc += w * inward / norm;
        weight += w;
      }
    }
  }
  return weight > 0.0 ? acc / weight : 0.0;
}

}  // namespace voxelhop
