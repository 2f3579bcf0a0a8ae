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

#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "segstudio/contour.hpp"

using namespace segstudio;
using nlohmann::json;

namespace {

Grid slab(std::int64_t n, std::int64_t slices = 3) {
  Grid g;
  g.rows = g.cols = n;
  g.slices = slices;
  return g;
}

json square(double lo, double hi, double z) {
  return json::array({{lo, lo, z}, {hi, lo, z}, {hi, hi, z}, {lo, hi, z}});
}

ContourSet one_roi(std::vector<std::vector<WorldPoint>> polys) {
  ContourSet cs;
  cs.referenced_series = "s";
  ContourRoi r{Roi{1, "organ", {1, 2, 3}}, {}};
  for (auto& p : polys) r.contours.push_back({1, std::nullopt, std::move(p)});
  cs.rois.push_back(std::move(r));
  return cs;
}

std::vector<WorldPoint> lift(const std::vector<Eigen::Vector2d>& poly, double z) {
  std::vector<WorldPoint> out;
  for (const auto& p : poly) out.emplace_back(p.x(), p.y(), z);
  return out;
}

}  // namespace

TEST_CASE("parse a one-ROI structure set") {
  const json doc = {{"referenced_series", "1.2.3"},
                    {"rois", {{{"number", 1}, {"name", "liver"}, {"color", {255, 0, 0}}}}},
                    {"contours", {{{"roi_number", 1}, {"points", square(0, 2, 0)}}}}};
  const ContourSet cs = parse_structure_set(doc);
  REQUIRE(cs.rois.size() == 1);
  CHECK(cs.rois[0].roi.name == "liver");
  CHECK(cs.rois[0].roi.color == Color{255, 0, 0});
  REQUIRE(cs.rois[0].contours.size() == 1);
  CHECK(cs.rois[0].contours[0].vertices.size() == 4);
  CHECK(cs.referenced_series == "1.2.3");

  // Text form and the flat ContourData spelling agree.
  json flat = doc;
  flat["contours"][0].erase("points");
  flat["contours"][0]["contour_data"] = {0, 0, 0, 2, 0, 0, 2, 2, 0, 0, 2, 0};
  const ContourSet cs2 = parse_structure_set_text(flat.dump());
  CHECK(cs2.rois[0].contours[0].vertices == cs.rois[0].contours[0].vertices);
  CHECK(parse_structure_set(to_json(cs)).rois[0].contours[0].vertices ==
        cs.rois[0].contours[0].vertices);
}

TEST_CASE("structure set parse errors") {
  const json two_vertices = {
      {"rois", {{{"number", 1}, {"name", "liver"}}}},
      {"contours", {{{"roi_number", 1}, {"points", {{0, 0, 0}, {1, 0, 0}}}}}}};
  CHECK_THROWS_AS(parse_structure_set(two_vertices), ParseError);

  const json dangling = {{"rois", {{{"number", 1}, {"name", "liver"}}}},
                         {"contours", {{{"roi_number", 9}, {"points", square(0, 1, 0)}}}}};
  CHECK_THROWS_AS(parse_structure_set(dangling), ParseError);

  const json unnamed = {{"rois", {{{"number", 1}}}}, {"contours", json::array()}};
  CHECK_THROWS_AS(parse_structure_set(unnamed), ParseError);

  CHECK_THROWS_AS(parse_structure_set_text("{not json"), ParseError);
}

TEST_CASE("axis-aligned square covers a 3x3 block of centres") {
  const Grid g = slab(6);
  const SegmentationSet s = rasterize_contours(
      one_roi({{{-0.25, -0.25, 1}, {2.25, -0.25, 1}, {2.25, 2.25, 1}, {-0.25, 2.25, 1}}}), g);
  REQUIRE(s.rois.size() == 1);
  const VoxelMask& m = s.rois[0].mask;
  CHECK(m.popcount() == 9);
  for (std::int64_t j = 0; j < 3; ++j)
    for (std::int64_t i = 0; i < 3; ++i) CHECK(m.test(VoxelIndex{i, j, 1}));
}

TEST_CASE("nested contours make a hole under even-odd") {
  const Grid g = slab(6);
  auto sq = [](double lo, double hi) {
    return std::vector<WorldPoint>{{lo, lo, 0}, {hi, lo, 0}, {hi, hi, 0}, {lo, hi, 0}};
  };
  const VoxelMask m = rasterize_contours(one_roi({sq(-0.25, 4.25), sq(0.75, 3.25)}), g).rois[0].mask;
  CHECK(m.popcount() == 25 - 9);
  CHECK_FALSE(m.test(VoxelIndex{2, 2, 0}));
  CHECK(m.test(VoxelIndex{0, 0, 0}));
  CHECK(m.test(VoxelIndex{4, 4, 0}));
}

TEST_CASE("empty contour set rasterizes to no ROIs") {
  CHECK(rasterize_contours(ContourSet{}, slab(4)).rois.empty());
}

TEST_CASE("edge convention: lower edge inside, upper edge outside") {
  // Square with edges exactly on centres 0 and 2: half-open rule keeps the
  // rows/columns on the low edges and drops the high ones.
  const Grid g = slab(5, 1);
  const VoxelMask m = rasterize_contours(one_roi({{{0, 0, 0}, {2, 0, 0}, {2, 2, 0}, {0, 2, 0}}}), g)
                          .rois[0]
                          .mask;
  for (std::int64_t j = 0; j < 5; ++j) {
    for (std::int64_t i = 0; i < 5; ++i) {
      std::vector<Eigen::Vector2d> poly{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
      CHECK(m.test(VoxelIndex{i, j, 0}) == oracle::point_in_polygon(poly, double(i), double(j)));
    }
  }
}

TEST_CASE("slice assignment and geometry errors") {
  const Grid g = slab(4, 3);
  CHECK(rasterize_contours(one_roi({{{0, 0, 1.4}, {2, 0, 1.4}, {2, 2, 1.4}}}), g)
            .rois[0]
            .mask.popcount() > 0);
  CHECK_THROWS_AS(rasterize_contours(one_roi({{{0, 0, 5.7}, {2, 0, 5.7}, {2, 2, 5.7}}}), g),
                  GeometryError);
  CHECK_THROWS_AS(rasterize_contours(one_roi({{{0, 0, 1.0}, {2, 0, 1.0}, {2, 2, 1.1}}}), g),
                  GeometryError);
}

TEST_CASE("random polygons agree with the ray-casting oracle") {
  std::mt19937_64 rng(5);
  const Grid g = slab(32, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto poly = oracle::random_simple_polygon(rng, 32);
    const VoxelMask m = rasterize_contours(one_roi({lift(poly, 0)}), g).rois[0].mask;
    for (std::int64_t j = 0; j < g.rows; ++j) {
      for (std::int64_t i = 0; i < g.cols; ++i) {
        const Eigen::Vector2d c{double(i), double(j)};
        if (oracle::distance_to_boundary(poly, c) <= 1e-9) continue;
        REQUIRE(m.test(VoxelIndex{i, j, 0}) == oracle::point_in_polygon(poly, c.x(), c.y()));
      }
    }
  }
}

TEST_CASE("reversal and translation invariance") {
  std::mt19937_64 rng(9);
  const Grid g = slab(40, 1);
  for (int trial = 0; trial < 30; ++trial) {
    auto poly = oracle::random_simple_polygon(rng, 30);
    const VoxelMask m = rasterize_contours(one_roi({lift(poly, 0)}), g).rois[0].mask;
    auto reversed = poly;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(rasterize_contours(one_roi({lift(reversed, 0)}), g).rois[0].mask == m);

    auto shifted = poly;
    for (auto& p : shifted) p += Eigen::Vector2d(1, 1);
    const VoxelMask t = rasterize_contours(one_roi({lift(shifted, 0)}), g).rois[0].mask;
    for (std::int64_t j = 0; j + 1 < g.rows; ++j)
      for (std::int64_t i = 0; i + 1 < g.cols; ++i)
        REQUIRE(t.test(VoxelIndex{i + 1, j + 1, 0}) == m.test(VoxelIndex{i, j, 0}));
  }
}

TEST_CASE("oblique grid uses in-plane coordinates") {
  std::mt19937_64 rng(13);
  Grid g = oracle::random_grid(rng, 1);
  g.rows = g.cols = 24;
  g.slices = 3;
  g.row_spacing = 0.8;
  g.col_spacing = 1.1;
  g.slice_spacing = 2.0;
  const auto plane = oracle::random_simple_polygon(rng, 20);
  std::vector<WorldPoint> verts;
  for (const auto& p : plane) {
    verts.push_back(g.origin + p.x() * g.i_axis + p.y() * g.j_axis + 2.0 * 2.0 * g.normal());
  }
  const VoxelMask m = rasterize_contours(one_roi({verts}), g).rois[0].mask;
  CHECK(m.popcount() > 0);
  for (std::int64_t j = 0; j < g.rows; ++j) {
    for (std::int64_t i = 0; i < g.cols; ++i) {
      const Eigen::Vector2d c(double(i) * g.col_spacing, double(j) * g.row_spacing);
      if (oracle::distance_to_boundary(plane, c) <= 1e-6) continue;
      REQUIRE(m.test(VoxelIndex{i, j, 2}) == oracle::point_in_polygon(plane, c.x(), c.y()));
    }
  }
}
