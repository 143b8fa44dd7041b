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

#include "rtgmff/synth/cohort.hpp"

#include <cmath>
#include <stdexcept>

#include "rtgmff/num/rng.hpp"

namespace rtgmff::synth {

using num::Rng;

std::vector<double> Subject::voxel_series(int roi, int voxel) const {
  std::vector<double> out(static_cast<std::size_t>(n_timepoints));
  for (int t = 0; t < n_timepoints; ++t) out[static_cast<std::size_t>(t)] = series(roi, voxel, t);
  return out;
}

std::vector<double> Subject::spatial_mean_series(int roi) const {
  std::vector<double> out(static_cast<std::size_t>(n_timepoints), 0.0);
  for (int v = 0; v < n_voxels; ++v) {
    for (int t = 0; t < n_timepoints; ++t) out[static_cast<std::size_t>(t)] += series(roi, v, t);
  }
  for (auto& x : out) x /= static_cast<double>(n_voxels);
  return out;
}

void Subject::validate() const {
  if (n_voxels < 2) throw std::invalid_argument("Subject: need at least 2 voxels per ROI");
  if (n_timepoints < 64) throw std::invalid_argument("Subject: need at least 64 timepoints");
  const auto expect = static_cast<std::size_t>(kNumRois) * static_cast<std::size_t>(n_voxels) *
                      static_cast<std::size_t>(n_timepoints);
  if (roi_series.size() != expect) throw std::invalid_argument("Subject: series buffer size mismatch");
  if (age_years <= 0.0) throw std::invalid_argument("Subject: age must be positive");
  for (double v : roi_series) {
    if (!std::isfinite(v)) throw std::invalid_argument("Subject: non-finite series value");
  }
}

void CohortSpec::validate() const {
  if (n_subjects < 1) throw std::invalid_argument("CohortSpec: n_subjects must be positive");
  if (n_sites < 1 || n_sites > n_subjects) throw std::invalid_argument("CohortSpec: bad n_sites");
  if (!(class_ratio > 0.0 && class_ratio < 1.0)) throw std::invalid_argument("CohortSpec: class_ratio in (0,1)");
  for (int r : planted_rois) {
    if (r < 0 || r >= kNumRois) throw std::invalid_argument("CohortSpec: planted ROI index out of [0,116)");
  }
  if (effect_size < 0.0) throw std::invalid_argument("CohortSpec: effect_size must be nonnegative");
  if (sampling_rate_hz <= 0.16) {
    throw std::invalid_argument("CohortSpec: sampling rate must exceed 0.16 Hz (Nyquist above band edge)");
  }
  if (t_len < 64) throw std::invalid_argument("CohortSpec: t_len must be at least 64");
  if (v_voxels < 2) throw std::invalid_argument("CohortSpec: v_voxels must be at least 2");
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kBaseline = 1000.0;
constexpr double kDeltaSigma = 0.2;      // percent-signal-change spread
constexpr double kSiteBaselineAmp = 0.08;  // percent units
constexpr double kSiteWaveAmp = 0.06;

// DFT bin indices usable as in-band / out-of-band tones.
struct BinRanges {
  std::vector<int> in_band;
  std::vector<int> out_band;
};

BinRanges usable_bins(int t_len, double fs) {
  BinRanges r;
  const double df = fs / static_cast<double>(t_len);
  for (int k = 1; k <= t_len / 2 - 1; ++k) {
    const double f = df * k;
    if (f >= 0.01 && f <= 0.08) {
      r.in_band.push_back(k);
    } else if (f > 0.09) {
      r.out_band.push_back(k);
    }
  }
  if (r.in_band.empty() || r.out_band.empty()) {
    throw std::invalid_argument("generate_cohort: sampling grid leaves no usable in/out-of-band bins");
  }
  return r;
}

}  // namespace

std::vector<Subject> generate_cohort(const CohortSpec& spec) {
  spec.validate();
  const auto bins = usable_bins(spec.t_len, spec.sampling_rate_hz);
  std::vector<bool> planted(kNumRois, false);
  for (int r : spec.planted_rois) planted[static_cast<std::size_t>(r)] = true;

  // Per-site offset patterns: additive baseline shift per ROI plus an
  // additive in-band amplitude offset, both fixed per site.
  std::vector<std::vector<double>> site_base(static_cast<std::size_t>(spec.n_sites));
  std::vector<std::vector<double>> site_wave(static_cast<std::size_t>(spec.n_sites));
  for (int s = 0; s < spec.n_sites; ++s) {
    Rng sr(num::mix_seed(spec.seed ^ 0x517eULL, static_cast<std::uint64_t>(s)));
    auto& sb = site_base[static_cast<std::size_t>(s)];
    auto& sw = site_wave[static_cast<std::size_t>(s)];
    sb.resize(kNumRois);
    sw.resize(kNumRois);
    for (int r = 0; r < kNumRois; ++r) {
      sb[static_cast<std::size_t>(r)] = kSiteBaselineAmp * sr.gaussian();
      sw[static_cast<std::size_t>(r)] = kSiteWaveAmp * sr.gaussian();
    }
  }

  // Bresenham-style per-site label pattern hits class_ratio exactly.
  std::vector<int> site_seen(static_cast<std::size_t>(spec.n_sites), 0);

  std::vector<Subject> cohort;
  cohort.reserve(static_cast<std::size_t>(spec.n_subjects));
  for (int i = 0; i < spec.n_subjects; ++i) {
    Rng rng(num::mix_seed(spec.seed, static_cast<std::uint64_t>(i)));
    Subject sub;
    sub.subject_id = "sub-" + std::to_string(10000 + i);
    sub.n_voxels = spec.v_voxels;
    sub.n_timepoints = spec.t_len;
    sub.site_id = i % spec.n_sites;
    const int j = site_seen[static_cast<std::size_t>(sub.site_id)]++;
    const bool patient = std::floor((j + 1) * spec.class_ratio) > std::floor(j * spec.class_ratio);
    sub.label = patient ? Label::kPatient : Label::kControl;
    sub.age_years = rng.uniform(8.0, 18.0);
    sub.gender = rng.uniform() < 0.5 ? Gender::kMale : Gender::kFemale;

    const auto& sb = site_base[static_cast<std::size_t>(sub.site_id)];
    const auto& sw = site_wave[static_cast<std::size_t>(sub.site_id)];

    // Baselines first so the realized percent signal change (and hence the
    // planted strength bins) follow from a closed form.
    std::vector<double> baseline(kNumRois);
    for (int r = 0; r < kNumRois; ++r) {
      const double delta = kDeltaSigma * rng.gaussian() + sb[static_cast<std::size_t>(r)];
      baseline[static_cast<std::size_t>(r)] = kBaseline * (1.0 + delta / 100.0);
    }
    double mean_base = 0.0;
    for (double b : baseline) mean_base += b;
    mean_base /= static_cast<double>(kNumRois);
    sub.planted_strength.resize(kNumRois);
    for (int r = 0; r < kNumRois; ++r) {
      const double v = 100.0 * (baseline[static_cast<std::size_t>(r)] - mean_base) / mean_base;
      sub.planted_strength[static_cast<std::size_t>(r)] = std::abs(v) >= 0.30 ? 2 : (std::abs(v) >= 0.15 ? 1 : 0);
    }

    const auto t_len = static_cast<std::size_t>(spec.t_len);
    sub.roi_series.assign(static_cast<std::size_t>(kNumRois) * static_cast<std::size_t>(spec.v_voxels) * t_len, 0.0);
    std::vector<double> shared(t_len);
    std::vector<double> noise(t_len);
    for (int r = 0; r < kNumRois; ++r) {
      double amp_in = rng.uniform(0.7, 1.3) + sw[static_cast<std::size_t>(r)];
      const double amp_out = rng.uniform(0.7, 1.3);
      if (patient && planted[static_cast<std::size_t>(r)]) amp_in *= 1.0 + spec.effect_size;

      // Zero-mean shared waveform: tones on exact DFT bins sum to zero
      // over the record, so temporal means reduce to the baselines.
      std::fill(shared.begin(), shared.end(), 0.0);
      for (int tone = 0; tone < 3; ++tone) {
        const int k = bins.in_band[rng.uniform_int(bins.in_band.size())];
        const double phase = rng.uniform(0.0, kTwoPi);
        const double a = amp_in * rng.uniform(0.6, 1.0);
        for (std::size_t t = 0; t < t_len; ++t) {
          shared[t] += a * std::sin(kTwoPi * k * static_cast<double>(t) / static_cast<double>(spec.t_len) + phase);
        }
      }
      for (int tone = 0; tone < 2; ++tone) {
        const int k = bins.out_band[rng.uniform_int(bins.out_band.size())];
        const double phase = rng.uniform(0.0, kTwoPi);
        const double a = amp_out * rng.uniform(0.6, 1.0);
        for (std::size_t t = 0; t < t_len; ++t) {
          shared[t] += a * std::sin(kTwoPi * k * static_cast<double>(t) / static_cast<double>(spec.t_len) + phase);
        }
      }

      const double noise_sd = rng.uniform(0.3, 0.7);
      for (int v = 0; v < spec.v_voxels; ++v) {
        double m = 0.0;
        for (std::size_t t = 0; t < t_len; ++t) {
          noise[t] = noise_sd * rng.gaussian();
          m += noise[t];
        }
        m /= static_cast<double>(t_len);
        double* dst = sub.roi_series.data() +
                      (static_cast<std::size_t>(r) * static_cast<std::size_t>(spec.v_voxels) +
                       static_cast<std::size_t>(v)) * t_len;
        for (std::size_t t = 0; t < t_len; ++t) {
          dst[t] = baseline[static_cast<std::size_t>(r)] + shared[t] + (noise[t] - m);
        }
      }
    }
    sub.validate();
    cohort.push_back(std::move(sub));
  }
  return cohort;
}

}  // namespace rtgmff::synth
