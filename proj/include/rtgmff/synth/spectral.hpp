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

#include <complex>
#include <vector>

namespace rtgmff::synth {

/// Forward DFT. Radix-2 when the length is a power of two, direct
/// evaluation otherwise; series here are a few hundred samples at most.
std::vector<std::complex<double>> dft(const std::vector<double>& x);
std::vector<double> idft_real(const std::vector<std::complex<double>>& spectrum);

/// Ideal frequency-domain band-pass: DFT, zero every bin whose frequency
/// lies outside [low_hz, high_hz], inverse DFT. Linear and idempotent.
/// Requires 0 < low < high < fs/2.
std::vector<double> bandpass_filter(const std::vector<double>& series, double low_hz, double high_hz, double fs);

/// One-sided amplitude spectrum scaled so a unit-amplitude sinusoid on
/// bin k contributes amplitude 1 at k. Index 0 holds |DC|/T.
std::vector<double> amplitude_spectrum(const std::vector<double>& series);

/// Mean one-sided spectral amplitude over bins in [0.01, 0.08] Hz.
/// Throws when the series is shorter than 64 samples or no bin falls in
/// the band at this sampling rate.
double compute_alff(const std::vector<double>& series, double fs);

/// In-band amplitude sum over the full-band sum (DC excluded).
/// Throws on an all-zero spectrum.
double compute_falff(const std::vector<double>& series, double fs);

/// Kendall's coefficient of concordance W across V voxel series of length
/// T, with midranks for ties and the standard tie correction subtracted
/// from the denominator. Throws when every ranking is fully tied.
double compute_reho(const std::vector<std::vector<double>>& voxel_series);

}  // namespace rtgmff::synth
