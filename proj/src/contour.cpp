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

#include "segstudio/contour.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace segstudio {

namespace {

using nlohmann::json;

constexpr double kPlanarTolerance = 1e-3;  // mm along the slice normal

WorldPoint parse_point(const json& p) {
  if (!p.is_array() || p.size() != 3) throw ParseError("contour point must be [x, y, z]");
  WorldPoint w{p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
  if (!w.allFinite()) throw ParseError("contour point must be finite");
  return w;
}

Color parse_color(const json& c) {
  if (!c.is_array() || c.size() != 3) throw ParseError("ROI color must be [r, g, b]");
  auto byte = [](const json& v) {
    const int x = v.get<int>();
    if (x < 0 || x > 255) throw ParseError("ROI color component out of range", std::to_string(x));
    return static_cast<std::uint8_t>(x);
  };
  return {byte(c[0]), byte(c[1]), byte(c[2])};
}

}  // namespace

ContourSet parse_structure_set(const json& doc) {
  try {
    if (!doc.is_object()) throw ParseError("structure set must be a JSON object");
    ContourSet set;
    set.referenced_series = doc.value("referenced_series", std::string{});

    std::map<int, std::size_t> by_number;
    for (const auto& r : doc.at("rois")) {
      ContourRoi entry;
      entry.roi.number = r.at("number").get<int>();
      if (!r.contains("name") || !r["name"].is_string() || r["name"].get<std::string>().empty()) {
        throw ParseError("ROI is missing a name", std::to_string(entry.roi.number));
      }
      entry.roi.name = r["name"].get<std::string>();
      entry.roi.color = r.contains("color") ? parse_color(r["color"]) : Color{128, 128, 128};
      if (!by_number.emplace(entry.roi.number, set.rois.size()).second) {
        throw ParseError("duplicate ROI number", std::to_string(entry.roi.number));
      }
      set.rois.push_back(std::move(entry));
    }

    for (const auto& c : doc.value("contours", json::array())) {
      Contour contour;
      contour.roi_number = c.at("roi_number").get<int>();
      if (c.contains("slice_index")) contour.slice_index = c["slice_index"].get<std::int64_t>();
      if (c.contains("points")) {
        for (const auto& p : c["points"]) contour.vertices.push_back(parse_point(p));
      } else if (c.contains("contour_data")) {
        // Flat x1\y1\z1\x2... as in ContourData (3006,0050).
        const auto& flat = c["contour_data"];
        if (!flat.is_array() || flat.size() % 3 != 0) {
          throw ParseError("contour_data length must be a multiple of 3");
        }
        for (std::size_t n = 0; n < flat.size(); n += 3) {
          contour.vertices.push_back(
              parse_point(json::array({flat[n], flat[n + 1], flat[n + 2]})));
        }
      } else {
        throw ParseError("contour has no points");
      }
      if (contour.vertices.size() < 3) {
        throw ParseError("contour needs at least 3 vertices",
                         std::to_string(contour.vertices.size()));
      }
      auto it = by_number.find(contour.roi_number);
      if (it == by_number.end()) {
        throw ParseError("contour references an undeclared ROI",
                         std::to_string(contour.roi_number));
      }
      set.rois[it->second].contours.push_back(std::move(contour));
    }
    return set;
  } catch (const json::exception& e) {
    throw ParseError("malformed structure set", e.what());
  }
}

ContourSet parse_structure_set_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("structure set is not valid JSON", e.what());
  }
  return parse_structure_set(doc);
}

json to_json(const ContourSet& set) {
  json rois = json::array();
  json contours = json::array();
  for (const auto& r : set.rois) {
    rois.push_back({{"number", r.roi.number},
                    {"name", r.roi.name},
                    {"color", {r.roi.color.r, r.roi.color.g, r.roi.color.b}}});
    for (const auto& c : r.contours) {
      json pts = json::array();
      for (const auto& v : c.vertices) pts.push_back({v.x(), v.y(), v.z()});
      json entry = {{"roi_number", c.roi_number}, {"points", std::move(pts)}};
      if (c.slice_index) entry["slice_index"] = *c.slice_index;
      contours.push_back(std::move(entry));
    }
  }
  return {{"format", "segstudio.structure-set"},
          {"version", 1},
          {"referenced_series", set.referenced_series},
          {"rois", std::move(rois)},
          {"contours", std::move(contours)}};
}

void fill_slice(VoxelMask& mask, std::int64_t slice, std::span<const PlanarPolygon> polygons) {
  const Grid& grid = mask.grid();
  std::vector<double> crossings;
  for (std::int64_t j = 0; j < grid.rows; ++j) {
    const double y = static_cast<double>(j) * grid.row_spacing;
    crossings.clear();
    for (const auto& poly : polygons) {
      const auto& pts = poly.points;
      for (std::size_t n = 0, m = pts.size() - 1; n < pts.size(); m = n++) {
        // Order endpoints by v so both traversal directions round identically.
        Eigen::Vector2d a = pts[m];
        Eigen::Vector2d b = pts[n];
        if (b.y() < a.y()) std::swap(a, b);
        if ((a.y() > y) == (b.y() > y)) continue;
        crossings.push_back((b.x() - a.x()) * (y - a.y()) / (b.y() - a.y()) + a.x());
      }
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    std::size_t passed = 0;  // crossings at or left of the current centre
    for (std::int64_t i = 0; i < grid.cols; ++i) {
      const double x = static_cast<double>(i) * grid.col_spacing;
      while (passed < crossings.size() && crossings[passed] <= x) ++passed;
      if (passed == crossings.size()) break;
      if ((crossings.size() - passed) % 2 == 1) mask.set(VoxelIndex{i, j, slice});
    }
  }
}

SegmentationSet rasterize_contours(const ContourSet& set, const Grid& grid) {
  grid.validate();
  SegmentationSet out;
  out.series_ref = set.referenced_series;
  out.grid = grid;
  const Vec3<double> normal = grid.normal();

  for (const auto& r : set.rois) {
    std::map<std::int64_t, std::vector<PlanarPolygon>> by_slice;
    for (const auto& c : r.contours) {
      double lo = INFINITY, hi = -INFINITY, sum = 0;
      PlanarPolygon poly;
      poly.points.reserve(c.vertices.size());
      for (const auto& v : c.vertices) {
        const Vec3<double> d = v - grid.origin;
        const double h = d.dot(normal);
        lo = std::min(lo, h);
        hi = std::max(hi, h);
        sum += h;
        poly.points.emplace_back(d.dot(grid.i_axis), d.dot(grid.j_axis));
      }
      if (hi - lo > 2 * kPlanarTolerance) {
        throw GeometryError("contour is not planar along the slice normal",
                            r.roi.name + ": spread " + std::to_string(hi - lo) + " mm");
      }
      const double plane = sum / static_cast<double>(c.vertices.size());
      const std::int64_t k = c.slice_index
                                 ? *c.slice_index
                                 : static_cast<std::int64_t>(std::round(plane / grid.slice_spacing));
      const double offset = std::abs(plane - static_cast<double>(k) * grid.slice_spacing);
      if (k < 0 || k >= grid.slices || offset > grid.slice_spacing / 2) {
        throw GeometryError("contour plane is not within half a slice spacing of any slice",
                            r.roi.name + ": plane at " + std::to_string(plane) + " mm");
      }
      by_slice[k].push_back(std::move(poly));
    }

    VoxelMask mask(grid);
    for (const auto& [k, polys] : by_slice) fill_slice(mask, k, polys);
    out.rois.push_back({r.roi, std::move(mask)});
  }
  out.validate();
  return out;
}

}  // namespace segstudio
