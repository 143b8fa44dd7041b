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

#include "rtgmff/synth/feature_map.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "rtgmff/synth/spectral.hpp"

namespace rtgmff::synth {

std::vector<double> roi_delta_bold(const Subject& subject) {
  std::vector<double> means(kNumRois);
  double global = 0.0;
  for (int r = 0; r < kNumRois; ++r) {
    const auto s = subject.spatial_mean_series(r);
    double m = 0.0;
    for (double v : s) m += v;
    m /= static_cast<double>(s.size());
    means[static_cast<std::size_t>(r)] = m;
    global += m;
  }
  global /= static_cast<double>(kNumRois);
  if (global <= 0.0) throw std::invalid_argument("roi_delta_bold: global mean must be strictly positive");
  std::vector<double> v(kNumRois);
  for (int r = 0; r < kNumRois; ++r) {
    v[static_cast<std::size_t>(r)] = 100.0 * (means[static_cast<std::size_t>(r)] - global) / global;
  }
  return v;
}

namespace {

// Splits `total` into `parts` integer pieces, remainders to the front.
std::vector<int> split_even(int total, int parts) {
  std::vector<int> out(static_cast<std::size_t>(parts), total / parts);
  for (int i = 0; i < total % parts; ++i) out[static_cast<std::size_t>(i)] += 1;
  return out;
}

// Raster tiling of one hemisphere half into 58 rectangles.
std::vector<TileRect> tile_half(int height, int half_w, int x0) {
  constexpr int kHalfRois = kNumRois / 2;
  if (height * half_w < kHalfRois) {
    throw std::invalid_argument("AtlasLayout: canvas too small for 58 tiles per hemisphere");
  }
  int rows = static_cast<int>(std::lround(std::sqrt(static_cast<double>(kHalfRois) * height / half_w)));
  const int min_rows = (kHalfRois + half_w - 1) / half_w;
  rows = std::max(rows, min_rows);
  rows = std::min(rows, std::min(height, kHalfRois));

  const auto counts = split_even(kHalfRois, rows);
  const auto heights = split_even(height, rows);
  std::vector<TileRect> tiles;
  tiles.reserve(kHalfRois);
  int y = 0;
  for (int r = 0; r < rows; ++r) {
    const auto widths = split_even(half_w, counts[static_cast<std::size_t>(r)]);
    int x = x0;
    for (int c = 0; c < counts[static_cast<std::size_t>(r)]; ++c) {
      tiles.push_back(TileRect{x, y, widths[static_cast<std::size_t>(c)], heights[static_cast<std::size_t>(r)]});
      x += widths[static_cast<std::size_t>(c)];
    }
    y += heights[static_cast<std::size_t>(r)];
  }
  return tiles;
}

}  // namespace

AtlasLayout::AtlasLayout(int height, int width, std::vector<TileRect> tiles)
    : height_(height), width_(width), tiles_(std::move(tiles)) {
  if (static_cast<int>(tiles_.size()) != kNumRois) throw std::invalid_argument("AtlasLayout: need 116 tiles");
  index_pixels();
}

void AtlasLayout::index_pixels() {
  pixel_roi_.assign(static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_), -1);
  for (int roi = 0; roi < kNumRois; ++roi) {
    const auto& t = tiles_[static_cast<std::size_t>(roi)];
    if (t.x < 0 || t.y < 0 || t.w <= 0 || t.h <= 0 || t.x + t.w > width_ || t.y + t.h > height_) {
      throw std::invalid_argument("AtlasLayout: tile " + std::to_string(roi) + " outside canvas");
    }
    const bool right_half = 2 * t.x >= width_;
    if ((roi % 2 == 1) != right_half) {
      throw std::invalid_argument("AtlasLayout: ROI " + std::to_string(roi) + " on the wrong hemisphere half");
    }
    for (int y = t.y; y < t.y + t.h; ++y) {
      for (int x = t.x; x < t.x + t.w; ++x) {
        auto& cell = pixel_roi_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
        if (cell != -1) throw std::invalid_argument("AtlasLayout: overlapping tiles at ROI " + std::to_string(roi));
        cell = roi;
      }
    }
  }
  for (int p : pixel_roi_) {
    if (p == -1) throw std::invalid_argument("AtlasLayout: tiles do not cover the canvas");
  }
}

AtlasLayout AtlasLayout::make(int height, int width) {
  if (height < 1 || width < 2 || width % 2 != 0) {
    throw std::invalid_argument("AtlasLayout: width must be even and positive");
  }
  const int half_w = width / 2;
  const auto left = tile_half(height, half_w, 0);
  const auto right = tile_half(height, half_w, half_w);
  std::vector<TileRect> tiles(kNumRois);
  for (int k = 0; k < kNumRois / 2; ++k) {
    tiles[static_cast<std::size_t>(2 * k)] = left[static_cast<std::size_t>(k)];
    tiles[static_cast<std::size_t>(2 * k + 1)] = right[static_cast<std::size_t>(k)];
  }
  return AtlasLayout(height, width, std::move(tiles));
}

AtlasLayout AtlasLayout::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const int h = j.at("height").get<int>();
  const int w = j.at("width").get<int>();
  std::vector<TileRect> tiles(kNumRois);
  for (const auto& t : j.at("tiles")) {
    const int roi = t.at("roi").get<int>();
    if (roi < 0 || roi >= kNumRois) throw std::invalid_argument("AtlasLayout: ROI index out of range in JSON");
    tiles[static_cast<std::size_t>(roi)] =
        TileRect{t.at("x").get<int>(), t.at("y").get<int>(), t.at("w").get<int>(), t.at("h").get<int>()};
  }
  return AtlasLayout(h, w, std::move(tiles));
}

std::string AtlasLayout::to_json() const {
  nlohmann::json j;
  j["height"] = height_;
  j["width"] = width_;
  nlohmann::json tiles = nlohmann::json::array();
  for (int roi = 0; roi < kNumRois; ++roi) {
    const auto& t = tiles_[static_cast<std::size_t>(roi)];
    tiles.push_back({{"roi", roi}, {"x", t.x}, {"y", t.y}, {"w", t.w}, {"h", t.h}});
  }
  j["tiles"] = std::move(tiles);
  return j.dump(2) + "\n";
}

FeatureMap render_feature_map(const Subject& subject, const AtlasLayout& layout, double fs, bool zscore) {
  FeatureMap fm;
  for (auto& ch : fm.roi_values) ch.resize(kNumRois);
  std::vector<std::vector<double>> voxels(static_cast<std::size_t>(subject.n_voxels));
  for (int r = 0; r < kNumRois; ++r) {
    const auto mean_series = subject.spatial_mean_series(r);
    fm.roi_values[0][static_cast<std::size_t>(r)] = compute_alff(mean_series, fs);
    fm.roi_values[1][static_cast<std::size_t>(r)] = compute_falff(mean_series, fs);
    for (int v = 0; v < subject.n_voxels; ++v) {
      voxels[static_cast<std::size_t>(v)] = bandpass_filter(subject.voxel_series(r, v), 0.01, 0.08, fs);
    }
    fm.roi_values[2][static_cast<std::size_t>(r)] = compute_reho(voxels);
  }

  std::array<std::vector<double>, 3> painted = fm.roi_values;
  if (zscore) {
    for (auto& ch : painted) {
      double m = 0.0;
      for (double v : ch) m += v;
      m /= static_cast<double>(kNumRois);
      double var = 0.0;
      for (double v : ch) var += (v - m) * (v - m);
      var /= static_cast<double>(kNumRois);
      if (var > 0.0) {
        const double inv = 1.0 / std::sqrt(var);
        for (double& v : ch) v = (v - m) * inv;
      } else {
        for (double& v : ch) v = 0.0;
      }
    }
  }

  const int h = layout.height(), w = layout.width();
  fm.image = num::Tensor::zeros({h, w, 3});
  double* img = fm.image.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int roi = layout.roi_at(y, x);
      for (int c = 0; c < 3; ++c) {
        img[(static_cast<std::size_t>(y) * w + x) * 3 + c] = painted[static_cast<std::size_t>(c)][static_cast<std::size_t>(roi)];
      }
    }
  }
  return fm;
}

}  // namespace rtgmff::synth
