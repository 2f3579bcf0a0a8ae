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

/*
 * Volume coordinate frame.
 *
 * A grid maps integer voxel indices (i = column, j = row, k = slice) to
 * patient-space millimetres. Positions always refer to voxel CENTRES, the
 * same convention DICOM uses for ImagePositionPatient:
 *
 *   world = origin + i * col_spacing   * i_axis
 *                  + j * row_spacing   * j_axis
 *                  + k * slice_spacing * (i_axis x j_axis)
 *
 * `i_axis` is the first ImageOrientationPatient triple (direction of
 * increasing column index), `j_axis` the second. `row_spacing` and
 * `col_spacing` follow PixelSpacing order: distance between adjacent rows,
 * then between adjacent columns.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "segstudio/errors.hpp"

namespace segstudio {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

using WorldPoint = Vec3<double>;

struct VoxelIndex {
  std::int64_t i = 0;  // column
  std::int64_t j = 0;  // row
  std::int64_t k = 0;  // slice

  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

/// Result of snapping a world point to the nearest voxel.
struct NearestVoxel {
  VoxelIndex index;
  bool in_bounds = false;
};

template <typename Scalar>
struct VolumeGrid {
  std::int64_t rows = 1;
  std::int64_t cols = 1;
  std::int64_t slices = 1;
  Scalar row_spacing = 1;
  Scalar col_spacing = 1;
  Scalar slice_spacing = 1;
  Vec3<Scalar> origin = Vec3<Scalar>::Zero();
  Vec3<Scalar> i_axis = Vec3<Scalar>::UnitX();
  Vec3<Scalar> j_axis = Vec3<Scalar>::UnitY();

  [[nodiscard]] Vec3<Scalar> normal() const { return i_axis.cross(j_axis); }

  [[nodiscard]] std::int64_t voxel_count() const noexcept { return rows * cols * slices; }
  [[nodiscard]] std::int64_t slice_size() const noexcept { return rows * cols; }

  [[nodiscard]] bool contains(const VoxelIndex& v) const noexcept {
    return v.i >= 0 && v.i < cols && v.j >= 0 && v.j < rows && v.k >= 0 && v.k < slices;
  }

  /// Linear offset in storage order: i fastest, then j, then k.
  [[nodiscard]] std::int64_t linear(const VoxelIndex& v) const noexcept {
    return v.i + cols * (v.j + rows * v.k);
  }

  [[nodiscard]] VoxelIndex unravel(std::int64_t offset) const noexcept {
    const std::int64_t i = offset % cols;
    const std::int64_t rest = offset / cols;
    return {i, rest % rows, rest / rows};
  }

  /// Exact field equality; masks may only be combined on identical grids.
  friend bool operator==(const VolumeGrid&, const VolumeGrid&) = default;

  /// Throws ArgumentError when the type invariants do not hold.
  void validate() const;
};

using Grid = VolumeGrid<double>;

template <typename Scalar>
void VolumeGrid<Scalar>::validate() const {
  if (rows < 1 || cols < 1 || slices < 1) {
    throw ArgumentError("grid dimensions must be >= 1",
                        std::to_string(cols) + "x" + std::to_string(rows) + "x" +
                            std::to_string(slices));
  }
  if (!(row_spacing > 0) || !(col_spacing > 0) || !(slice_spacing > 0)) {
    throw ArgumentError("grid spacings must be positive");
  }
  if (!origin.allFinite() || !i_axis.allFinite() || !j_axis.allFinite()) {
    throw ArgumentError("grid origin and orientation must be finite");
  }
  const Scalar tol = Scalar(1e-6);
  if (std::abs(i_axis.norm() - 1) > tol || std::abs(j_axis.norm() - 1) > tol) {
    throw ArgumentError("orientation direction cosines must be unit vectors");
  }
  if (std::abs(i_axis.dot(j_axis)) > tol) {
    throw ArgumentError("orientation direction cosines must be orthogonal");
  }
}

/// Continuous world position of a voxel centre. Throws BoundsError when `v`
/// lies outside the grid.
template <typename Scalar>
Vec3<Scalar> voxel_to_world(const VolumeGrid<Scalar>& grid, const VoxelIndex& v) {
  if (!grid.contains(v)) {
    throw BoundsError("voxel index outside grid", "(" + std::to_string(v.i) + "," +
                                                      std::to_string(v.j) + "," +
                                                      std::to_string(v.k) + ")");
  }
  return grid.origin + Scalar(v.i) * grid.col_spacing * grid.i_axis +
         Scalar(v.j) * grid.row_spacing * grid.j_axis +
         Scalar(v.k) * grid.slice_spacing * grid.normal();
}

/// Unchecked form for continuous indices, used by kernels that already
/// iterate in bounds.
template <typename Scalar>
Vec3<Scalar> index_to_world(const VolumeGrid<Scalar>& grid, const Vec3<Scalar>& ijk) {
  return grid.origin + ijk.x() * grid.col_spacing * grid.i_axis +
         ijk.y() * grid.row_spacing * grid.j_axis +
         ijk.z() * grid.slice_spacing * grid.normal();
}

/// Continuous (i, j, k) of a world point. The axes are orthonormal, so the
/// inverse is a transpose followed by a per-axis division.
template <typename Scalar>
Vec3<Scalar> world_to_voxel(const VolumeGrid<Scalar>& grid, const Vec3<Scalar>& p) {
  const Vec3<Scalar> d = p - grid.origin;
  return {d.dot(grid.i_axis) / grid.col_spacing, d.dot(grid.j_axis) / grid.row_spacing,
          d.dot(grid.normal()) / grid.slice_spacing};
}

/// Rounds each axis half-away-from-zero and reports whether the result is
/// inside the grid.
template <typename Scalar>
NearestVoxel nearest_voxel(const VolumeGrid<Scalar>& grid, const Vec3<Scalar>& p) {
  const Vec3<Scalar> c = world_to_voxel(grid, p);
  NearestVoxel out;
  out.index = {static_cast<std::int64_t>(std::round(c.x())),
               static_cast<std::int64_t>(std::round(c.y())),
               static_cast<std::int64_t>(std::round(c.z()))};
  out.in_bounds = grid.contains(out.index);
  return out;
}

template <typename Scalar>
Scalar voxel_volume(const VolumeGrid<Scalar>& grid) noexcept {
  return grid.row_spacing * grid.col_spacing * grid.slice_spacing;
}

/// ImageOrientationPatient-style six-vector: i_axis then j_axis.
template <typename Scalar>
std::array<Scalar, 6> orientation_cosines(const VolumeGrid<Scalar>& grid) {
  return {grid.i_axis.x(), grid.i_axis.y(), grid.i_axis.z(),
          grid.j_axis.x(), grid.j_axis.y(), grid.j_axis.z()};
}

}  // namespace segstudio
