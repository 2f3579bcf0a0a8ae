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

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segstudio/geometry.hpp"
#include "segstudio/mask.hpp"

namespace segstudio {

/// One closed planar polygon in patient millimetres. The closing edge from
/// the last vertex back to the first is implicit.
struct Contour {
  int roi_number = 0;
  std::optional<std::int64_t> slice_index;  // derived from the vertices when absent
  std::vector<WorldPoint> vertices;
};

struct ContourRoi {
  Roi roi;
  std::vector<Contour> contours;
};

struct ContourSet {
  std::string referenced_series;
  std::vector<ContourRoi> rois;
};

/// Parses the structure-set ingest document (see docs/formats.md). Contours
/// are attached to their ROI by `roi_number`.
///
/// Throws ParseError on a missing ROI name, a contour with fewer than three
/// vertices, a contour referencing an undeclared ROI, or malformed JSON.
ContourSet parse_structure_set(const nlohmann::json& doc);
ContourSet parse_structure_set_text(std::string_view text);

nlohmann::json to_json(const ContourSet& set);

/// Fills every ROI's contours onto `grid` with the even-odd rule, sampling
/// voxel centres. Each contour lands on the nearest slice; a contour more than
/// half a slice spacing from every slice, or one that is not planar within
/// 1e-3 mm, raises GeometryError.
SegmentationSet rasterize_contours(const ContourSet& set, const Grid& grid);

/// In-plane (u, v) millimetre coordinates of a polygon on one slice, measured
/// from the grid origin along i_axis and j_axis.
struct PlanarPolygon {
  std::vector<Eigen::Vector2d> points;
};

/// Even-odd scanline fill of the union of `polygons` onto one slice of
/// `mask`. A centre counts as inside when a +u ray crosses an odd number of
/// edges, each edge spanning the half-open interval [min v, max v).
void fill_slice(VoxelMask& mask, std::int64_t slice, std::span<const PlanarPolygon> polygons);

}  // namespace segstudio
