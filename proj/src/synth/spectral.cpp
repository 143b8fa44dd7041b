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

#include "rtgmff/synth/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rtgmff::synth {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace

std::vector<std::complex<double>> dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  if (is_pow2(n)) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::complex<double>(x[i], 0.0);
    fft_inplace(out, false);
    return out;
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -kTwoPi * static_cast<double>(k) * static_cast<double>(t) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> idft_real(const std::vector<std::complex<double>>& spectrum) {
  const std::size_t n = spectrum.size();
  std::vector<double> out(n);
  if (is_pow2(n)) {
    auto a = spectrum;
    fft_inplace(a, true);
    for (std::size_t t = 0; t < n; ++t) out[t] = a[t].real() / static_cast<double>(n);
    return out;
  }
  for (std::size_t t = 0; t < n; ++t) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double ang = kTwoPi * static_cast<double>(k) * static_cast<double>(t) / static_cast<double>(n);
      acc += spectrum[k] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[t] = acc.real() / static_cast<double>(n);
  }
  return out;
}

std::vector<double> bandpass_filter(const std::vector<double>& series, double low_hz, double high_hz, double fs) {
  if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0)) {
    throw std::invalid_argument("bandpass_filter: need 0 < low < high < fs/2");
  }
  const std::size_t n = series.size();
  auto spec = dft(series);
  const double df = fs / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    // Frequency of bin k, folding the conjugate half.
    const std::size_t kf = k <= n / 2 ? k : n - k;
    const double f = df * static_cast<double>(kf);
    if (f < low_hz || f > high_hz) spec[k] = {0.0, 0.0};
  }
  return idft_real(spec);
}

std::vector<double> amplitude_spectrum(const std::vector<double>& series) {
  const std::size_t n = series.size();
  auto spec = dft(series);
  const std::size_t half = n / 2;
  std::vector<double> amp(half + 1);
  amp[0] = std::abs(spec[0]) / static_cast<double>(n);
  for (std::size_t k = 1; k <= half; ++k) {
    const bool paired = !(n % 2 == 0 && k == half);
    amp[k] = std::abs(spec[k]) * (paired ? 2.0 : 1.0) / static_cast<double>(n);
  }
  return amp;
}

namespace {

// In-band bin range [k_lo, k_hi] for the one-sided spectrum, empty when
// k_lo > k_hi.
void band_bins(std::size_t n, double fs, double lo, double hi, std::size_t& k_lo, std::size_t& k_hi) {
  const double df = fs / static_cast<double>(n);
  k_lo = static_cast<std::size_t>(std::ceil(lo / df - 1e-12));
  if (k_lo < 1) k_lo = 1;
  const auto raw_hi = static_cast<std::size_t>(std::floor(hi / df + 1e-12));
  k_hi = std::min(raw_hi, n / 2);
}

}  // namespace

double compute_alff(const std::vector<double>& series, double fs) {
  if (series.size() < 64) throw std::invalid_argument("compute_alff: need at least 64 samples");
  std::size_t k_lo, k_hi;
  band_bins(series.size(), fs, 0.01, 0.08, k_lo, k_hi);
  if (k_lo > k_hi) {
    throw std::invalid_argument("compute_alff: no spectral bins inside 0.01-0.08 Hz at this length/rate");
  }
  const auto amp = amplitude_spectrum(series);
  double s = 0.0;
  for (std::size_t k = k_lo; k <= k_hi; ++k) s += amp[k];
  return s / static_cast<double>(k_hi - k_lo + 1);
}

double compute_falff(const std::vector<double>& series, double fs) {
  if (series.size() < 64) throw std::invalid_argument("compute_falff: need at least 64 samples");
  std::size_t k_lo, k_hi;
  band_bins(series.size(), fs, 0.01, 0.08, k_lo, k_hi);
  if (k_lo > k_hi) {
    throw std::invalid_argument("compute_falff: no spectral bins inside 0.01-0.08 Hz at this length/rate");
  }
  const auto amp = amplitude_spectrum(series);
  double band = 0.0, total = 0.0;
  for (std::size_t k = 1; k < amp.size(); ++k) {
    total += amp[k];
    if (k >= k_lo && k <= k_hi) band += amp[k];
  }
  if (total <= 0.0) throw std::invalid_argument("compute_falff: zero total spectral amplitude");
  return band / total;
}

namespace {

// Midranks of one series.
std::vector<double> midranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Tie correction sum(t^3 - t) over tie groups of one series.
double tie_term(const std::vector<double>& x) {
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    total += t * t * t - t;
    i = j + 1;
  }
  return total;
}

}  // namespace

double compute_reho(const std::vector<std::vector<double>>& voxel_series) {
  const std::size_t v = voxel_series.size();
  if (v < 2) throw std::invalid_argument("compute_reho: need at least 2 voxel series");
  const std::size_t t = voxel_series.front().size();
  if (t < 2) throw std::invalid_argument("compute_reho: need at least 2 timepoints");
  for (const auto& s : voxel_series) {
    if (s.size() != t) throw std::invalid_argument("compute_reho: ragged voxel series");
  }
  std::vector<double> rank_sum(t, 0.0);
  double ties = 0.0;
  for (const auto& s : voxel_series) {
    const auto r = midranks(s);
    for (std::size_t k = 0; k < t; ++k) rank_sum[k] += r[k];
    ties += tie_term(s);
  }
  const double mean_rs = static_cast<double>(v) * (static_cast<double>(t) + 1.0) / 2.0;
  double s_stat = 0.0;
  for (double rs : rank_sum) s_stat += (rs - mean_rs) * (rs - mean_rs);
  const double tf = static_cast<double>(t);
  const double vf = static_cast<double>(v);
  const double denom = vf * vf * (tf * tf * tf - tf) - vf * ties;
  if (denom <= 0.0) throw std::invalid_argument("compute_reho: degenerate input (all ranks tied)");
  return 12.0 * s_stat / denom;
}

}  // namespace rtgmff::synth
