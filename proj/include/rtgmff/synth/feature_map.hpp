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

#include <array>
#include <string>
#include <vector>

#include "rtgmff/num/tensor.hpp"
#include "rtgmff/synth/cohort.hpp"

namespace rtgmff::synth {

/// Percent signal change per ROI: the temporal mean of each ROI's
/// spatial-mean series, referenced to the mean over all ROIs and
/// timepoints. Adding a constant or rescaling every series moves the
/// reference with it, so the vector reflects relative regional deviation
/// only. Throws when the global mean is not strictly positive.
std::vector<double> roi_delta_bold(const Subject& subject);

struct TileRect {
  int x = 0, y = 0, w = 0, h = 0;
};

/// Fixed rectangular tiling of an H x W canvas into 116 ROI tiles, even
/// ROI indices (left hemisphere) on the left half of the width axis and
/// odd indices on the right half. Tiles partition each half exactly.
class AtlasLayout {
 public:
  /// Builds the deterministic default layout for the given canvas.
  static AtlasLayout make(int height, int width);
  /// Loads/saves the auditable JSON form.
  static AtlasLayout from_json(const std::string& text);
  std::string to_json() const;

  int height() const { return height_; }
  int width() const { return width_; }
  const TileRect& tile(int roi) const { return tiles_[static_cast<std::size_t>(roi)]; }
  /// Inverse lookup; every pixel belongs to exactly one ROI.
  int roi_at(int y, int x) const { return pixel_roi_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)]; }

 private:
  AtlasLayout(int height, int width, std::vector<TileRect> tiles);
  void index_pixels();

  int height_ = 0, width_ = 0;
  std::vector<TileRect> tiles_;
  std::vector<int> pixel_roi_;
};

/// The H x W x 3 encoder input with channels {ALFF, fALFF, ReHo}. The
/// per-ROI channel values are kept pre-z-scoring for tests and audits.
struct FeatureMap {
  num::Tensor image;  // [H,W,3], each channel z-scored across tiles
  std::array<std::vector<double>, 3> roi_values;
};

/// Renders one subject onto the layout. ALFF/fALFF come from the spectrum
/// of each ROI's spatial-mean series; ReHo is Kendall's W over the ROI's
/// band-limited (0.01-0.08 Hz) voxel series. Channels are z-scored over
/// the 116 tile values (population variance); a constant channel z-scores
/// to zeros.
FeatureMap render_feature_map(const Subject& subject, const AtlasLayout& layout, double fs,
                              bool zscore = true);

}  // namespace rtgmff::synth
