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

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segstudio/geometry.hpp"

namespace segstudio {

/// Dense binary occupancy, one bit per voxel, packed into 64-bit words in
/// grid storage order (i fastest). Bits past voxel_count() are always zero so
/// word-level kernels can popcount without masking the tail.
class VoxelMask {
 public:
  using Word = std::uint64_t;
  static constexpr int kWordBits = 64;

  VoxelMask() = default;
  explicit VoxelMask(const Grid& grid);

  [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
  [[nodiscard]] std::int64_t size() const noexcept { return grid_.voxel_count(); }

  [[nodiscard]] bool test(std::int64_t offset) const noexcept {
    return (words_[static_cast<std::size_t>(offset / kWordBits)] >> (offset % kWordBits)) & 1u;
  }
  [[nodiscard]] bool test(const VoxelIndex& v) const noexcept { return test(grid_.linear(v)); }

  void set(std::int64_t offset, bool value = true) noexcept {
    Word& w = words_[static_cast<std::size_t>(offset / kWordBits)];
    const Word bit = Word{1} << (offset % kWordBits);
    w = value ? (w | bit) : (w & ~bit);
  }
  void set(const VoxelIndex& v, bool value = true) noexcept { set(grid_.linear(v), value); }

  [[nodiscard]] std::int64_t popcount() const noexcept;
  [[nodiscard]] bool empty() const noexcept { return popcount() == 0; }

  [[nodiscard]] std::span<const Word> words() const noexcept { return words_; }
  [[nodiscard]] std::span<Word> words() noexcept { return words_; }

  friend bool operator==(const VoxelMask&, const VoxelMask&) = default;

 private:
  Grid grid_;
  std::vector<Word> words_;
};

/// All bits clear.
VoxelMask new_mask(const Grid& grid);

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Color&, const Color&) = default;
};

/// Fixed display palette, cycled for ROIs created without an explicit color.
Color palette_color(std::size_t index) noexcept;

struct Roi {
  int number = 0;
  std::string name;
  Color color;
  friend bool operator==(const Roi&, const Roi&) = default;
};

struct RoiMask {
  Roi roi;
  VoxelMask mask;
  friend bool operator==(const RoiMask&, const RoiMask&) = default;
};

enum class ProvenanceSource { Manual, Model, Edited, Derived };

struct Provenance {
  ProvenanceSource source = ProvenanceSource::Manual;
  std::string model_id;       // Model only
  std::string model_version;  // Model only
  std::int64_t edited_from = 0;  // Edited only: parent version that was edited
  std::int64_t created_at_us = 0;  // microseconds since the Unix epoch
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

std::string_view to_string(ProvenanceSource source) noexcept;
ProvenanceSource provenance_source_from_string(std::string_view text);

/// A named, coloured collection of ROI masks on one series grid. `version`
/// is 0 until the store assigns one.
struct SegmentationSet {
  std::string series_ref;
  Grid grid;
  std::vector<RoiMask> rois;
  std::int64_t version = 0;
  std::optional<std::int64_t> parent_version;
  Provenance provenance;

  [[nodiscard]] const RoiMask* find(std::string_view name) const noexcept;
  [[nodiscard]] RoiMask* find_number(int number) noexcept;

  /// Checks unique ROI numbers, nonempty names and a shared grid.
  void validate() const;

  friend bool operator==(const SegmentationSet&, const SegmentationSet&) = default;
};

// Run-length codec ---------------------------------------------------------

/// Alternating zero-run / one-run counts over storage order, always starting
/// with a zero-run (0 when the first voxel is set). Interior runs are never
/// zero-length, so every mask has exactly one encoding.
using RleRuns = std::vector<std::uint64_t>;

RleRuns rle_encode(const VoxelMask& mask);

/// Throws CodecError when the runs do not sum to the grid's voxel count.
VoxelMask rle_decode(std::span<const std::uint64_t> runs, const Grid& grid);

/// True when `runs` has no zero-length run other than a leading one.
bool rle_is_canonical(std::span<const std::uint64_t> runs) noexcept;

// Editing ------------------------------------------------------------------

enum class BrushShape { Disk2d, Sphere3d };
enum class BrushMode { Paint, Erase };

struct Brush {
  WorldPoint center = WorldPoint::Zero();
  double radius = 0;  // mm
  BrushShape shape = BrushShape::Sphere3d;
  std::int64_t slice = 0;  // Disk2d only
  BrushMode mode = BrushMode::Paint;
};

/// Returns a copy of `mask` with every voxel whose centre lies within
/// `radius` mm of the brush centre (inclusive) painted or erased. A disk
/// brush only touches slice `slice` and measures in-plane distance.
VoxelMask apply_brush(const VoxelMask& mask, const Brush& brush);

struct MaskStats {
  std::int64_t voxel_count = 0;
  double volume_mm3 = 0;
};

MaskStats mask_stats(const VoxelMask& mask);

}  // namespace segstudio
