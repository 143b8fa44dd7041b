// Copyright 2026 The RTGMFF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rtgmff::synth {

inline constexpr int kNumRois = 116;

enum class Gender { kMale, kFemale };
enum class Label { kControl, kPatient };

/// One synthetic participant. `roi_series` is [roi][voxel][t] row-major.
/// `planted_strength` carries the generative strength bin per ROI (0 weak,
/// 1 moderate, 2 strong at thresholds 0.15/0.30); it exists only because
/// cohorts are synthetic and is never an input to the model.
struct Subject {
  std::string subject_id;
  int n_voxels = 0;
  int n_timepoints = 0;
  std::vector<double> roi_series;
  double age_years = 0.0;
  Gender gender = Gender::kMale;
  int site_id = 0;
  Label label = Label::kControl;
  std::vector<int> planted_strength;

  double series(int roi, int voxel, int t) const {
    return roi_series[(static_cast<std::size_t>(roi) * static_cast<std::size_t>(n_voxels) +
                       static_cast<std::size_t>(voxel)) * static_cast<std::size_t>(n_timepoints) +
                      static_cast<std::size_t>(t)];
  }
  std::vector<double> voxel_series(int roi, int voxel) const;
  /// Spatial mean over voxels, one value per timepoint.
  std::vector<double> spatial_mean_series(int roi) const;

  void validate() const;
};

struct CohortSpec {
  int n_subjects = 200;
  int n_sites = 5;
  double class_ratio = 0.5;
  std::vector<int> planted_rois;
  double effect_size = 0.0;
  double sampling_rate_hz = 0.5;
  int t_len = 128;
  int v_voxels = 8;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Deterministic cohort synthesis. Per-subject streams are derived from
/// (seed, subject index), so regeneration is byte-identical and subjects
/// are independent of each other and of evaluation order.
///
/// Construction per subject: each ROI gets a strictly positive baseline
/// encoding a drawn percent-signal-change target (plus a per-site additive
/// offset pattern), zero-mean in-band and out-of-band sinusoids shared
/// across the ROI's voxels, and demeaned white voxel noise. Patients get
/// the in-band sinusoid amplitudes of every planted ROI scaled by
/// (1 + effect_size). Ages are uniform in [8, 18]; labels hit class_ratio
/// within each site.
std::vector<Subject> generate_cohort(const CohortSpec& spec);

}  // namespace rtgmff::synth
