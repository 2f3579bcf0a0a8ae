// Copyright 2026 The segstudio Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "segstudio/mask.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

namespace segstudio {

Color palette_color(std::size_t index) noexcept {
  static constexpr Color kPalette[] = {{230, 25, 75},   {60, 180, 75},  {0, 130, 200},
                                       {245, 130, 48},  {145, 30, 180}, {70, 240, 240},
                                       {240, 50, 230},  {210, 245, 60}};
  return kPalette[index % std::size(kPalette)];
}

VoxelMask::VoxelMask(const Grid& grid)
    : grid_(grid),
      words_(static_cast<std::size_t>((grid.voxel_count() + kWordBits - 1) / kWordBits), 0) {
  grid.validate();
}

std::int64_t VoxelMask::popcount() const noexcept {
  std::int64_t n = 0;
  for (Word w : words_) n += std::popcount(w);
  return n;
}

VoxelMask new_mask(const Grid& grid) { return VoxelMask(grid); }

std::string_view to_string(ProvenanceSource source) noexcept {
  switch (source) {
    case ProvenanceSource::Manual: return "manual";
    case ProvenanceSource::Model: return "model";
    case ProvenanceSource::Edited: return "edited";
    case ProvenanceSource::Derived: return "derived";
  }
  return "manual";
}

ProvenanceSource provenance_source_from_string(std::string_view text) {
  if (text == "manual") return ProvenanceSource::Manual;
  if (text == "model") return ProvenanceSource::Model;
  if (text == "edited") return ProvenanceSource::Edited;
  if (text == "derived") return ProvenanceSource::Derived;
  throw ParseError("unknown provenance source", std::string(text));
}

const RoiMask* SegmentationSet::find(std::string_view name) const noexcept {
  for (const auto& r : rois) {
    if (r.roi.name == name) return &r;
  }
  return nullptr;
}

RoiMask* SegmentationSet::find_number(int number) noexcept {
  for (auto& r : rois) {
    if (r.roi.number == number) return &r;
  }
  return nullptr;
}

void SegmentationSet::validate() const {
  grid.validate();
  std::set<int> numbers;
  for (const auto& r : rois) {
    if (r.roi.number <= 0) {
      throw ArgumentError("ROI numbers must be positive", std::to_string(r.roi.number));
    }
    if (!numbers.insert(r.roi.number).second) {
      throw ArgumentError("duplicate ROI number", std::to_string(r.roi.number));
    }
    if (r.roi.name.empty()) throw ArgumentError("ROI name must be nonempty");
    if (!(r.mask.grid() == grid)) {
      throw GridMismatchError("ROI mask grid differs from segmentation grid", r.roi.name);
    }
  }
}

// RLE ----------------------------------------------------------------------

RleRuns rle_encode(const VoxelMask& mask) {
  RleRuns runs;
  const std::int64_t n = mask.size();
  bool current = false;
  std::uint64_t length = 0;
  const auto words = mask.words();
  for (std::int64_t base = 0; base < n; base += VoxelMask::kWordBits) {
    const VoxelMask::Word w = words[static_cast<std::size_t>(base / VoxelMask::kWordBits)];
    const int limit = static_cast<int>(std::min<std::int64_t>(VoxelMask::kWordBits, n - base));
    // Whole-word fast path when the word continues the current run.
    if (limit == VoxelMask::kWordBits && w == (current ? ~VoxelMask::Word{0} : 0)) {
      length += VoxelMask::kWordBits;
      continue;
    }
    int bit = 0;
    while (bit < limit) {
      // Length of the stretch of bits equal to `current` starting at `bit`.
      const VoxelMask::Word shifted = (current ? ~w : w) >> bit;
      int stretch = shifted == 0 ? VoxelMask::kWordBits - bit : std::countr_zero(shifted);
      stretch = std::min(stretch, limit - bit);
      length += static_cast<std::uint64_t>(stretch);
      bit += stretch;
      if (bit < limit) {
        runs.push_back(length);
        length = 0;
        current = !current;
      }
    }
  }
  runs.push_back(length);
  return runs;
}

VoxelMask rle_decode(std::span<const std::uint64_t> runs, const Grid& grid) {
  std::uint64_t total = 0;
  for (std::uint64_t r : runs) {
    if (r > static_cast<std::uint64_t>(grid.voxel_count()) - total) {
      throw CodecError("RLE runs exceed the grid voxel count",
                       std::to_string(grid.voxel_count()));
    }
    total += r;
  }
  if (total != static_cast<std::uint64_t>(grid.voxel_count())) {
    throw CodecError("RLE runs do not sum to the grid voxel count",
                     std::to_string(total) + " != " + std::to_string(grid.voxel_count()));
  }
  VoxelMask mask(grid);
  std::int64_t pos = 0;
  bool value = false;
  for (std::uint64_t r : runs) {
    if (value) {
      for (std::int64_t end = pos + static_cast<std::int64_t>(r); pos < end; ++pos) mask.set(pos);
    } else {
      pos += static_cast<std::int64_t>(r);
    }
    value = !value;
  }
  return mask;
}

bool rle_is_canonical(std::span<const std::uint64_t> runs) noexcept {
  if (runs.empty()) return false;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i] == 0) return false;
  }
  // A lone leading zero would describe an empty grid, which cannot exist.
  return !(runs.size() == 1 && runs[0] == 0);
}

// Brush --------------------------------------------------------------------

VoxelMask apply_brush(const VoxelMask& mask, const Brush& brush) {
  if (!(brush.radius >= 0) || !std::isfinite(brush.radius)) {
    throw ArgumentError("brush radius must be a finite non-negative number",
                        std::to_string(brush.radius));
  }
  if (!brush.center.allFinite()) throw ArgumentError("brush centre must be finite");
  const Grid& grid = mask.grid();
  const bool disk = brush.shape == BrushShape::Disk2d;
  if (disk && (brush.slice < 0 || brush.slice >= grid.slices)) {
    throw BoundsError("disk brush slice outside grid", std::to_string(brush.slice));
  }

  // The axes are orthonormal, so the ball's index-space footprint is an
  // axis-aligned ellipsoid with half-extent radius/spacing per axis.
  const Vec3<double> c = world_to_voxel(grid, brush.center);
  const Vec3<double> half{brush.radius / grid.col_spacing, brush.radius / grid.row_spacing,
                          brush.radius / grid.slice_spacing};
  static constexpr double kClamp = 1e15;
  auto lo = [](double v) {
    return static_cast<std::int64_t>(std::floor(std::clamp(v, -kClamp, kClamp))) - 1;
  };
  auto hi = [](double v) {
    return static_cast<std::int64_t>(std::ceil(std::clamp(v, -kClamp, kClamp))) + 1;
  };
  const std::int64_t i0 = std::max<std::int64_t>(0, lo(c.x() - half.x()));
  const std::int64_t i1 = std::min<std::int64_t>(grid.cols - 1, hi(c.x() + half.x()));
  const std::int64_t j0 = std::max<std::int64_t>(0, lo(c.y() - half.y()));
  const std::int64_t j1 = std::min<std::int64_t>(grid.rows - 1, hi(c.y() + half.y()));
  std::int64_t k0 = std::max<std::int64_t>(0, lo(c.z() - half.z()));
  std::int64_t k1 = std::min<std::int64_t>(grid.slices - 1, hi(c.z() + half.z()));
  if (disk) k0 = k1 = brush.slice;

  VoxelMask out = mask;
  const bool paint = brush.mode == BrushMode::Paint;
  for (std::int64_t k = k0; k <= k1; ++k) {
    for (std::int64_t j = j0; j <= j1; ++j) {
      for (std::int64_t i = i0; i <= i1; ++i) {
        const VoxelIndex v{i, j, k};
        const Vec3<double> d = voxel_to_world(grid, v) - brush.center;
        double dist;
        if (disk) {
          const double a = d.dot(grid.i_axis);
          const double b = d.dot(grid.j_axis);
          dist = std::sqrt(a * a + b * b);
        } else {
          dist = d.norm();
        }
        if (dist <= brush.radius) out.set(v, paint);
      }
    }
  }
  return out;
}

MaskStats mask_stats(const VoxelMask& mask) {
  const std::int64_t n = mask.popcount();
  return {n, static_cast<double>(n) * voxel_volume(mask.grid())};
}

}  // namespace segstudio
