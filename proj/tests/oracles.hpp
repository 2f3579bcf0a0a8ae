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

// Brute-force reference computations and random generators shared by the
// unit and acceptance suites. Nothing here calls the word-level kernels or
// the scanline filler it is used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "segstudio/geometry.hpp"
#include "segstudio/mask.hpp"

namespace oracle {

using segstudio::Grid;
using segstudio::VoxelIndex;
using segstudio::VoxelMask;

struct Counts {
  std::int64_t a = 0, b = 0, both = 0;
};

/// Per-voxel counting through the public bit accessor.
inline Counts count_pair(const VoxelMask& a, const VoxelMask& b) {
  Counts c;
  for (std::int64_t n = 0; n < a.size(); ++n) {
    const bool x = a.test(n), y = b.test(n);
    c.a += x;
    c.b += y;
    c.both += x && y;
  }
  return c;
}

inline double brute_dice(const VoxelMask& a, const VoxelMask& b) {
  const Counts c = count_pair(a, b);
  if (c.a + c.b == 0) return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

inline std::vector<bool> flat_bits(const VoxelMask& m) {
  std::vector<bool> out(static_cast<std::size_t>(m.size()));
  for (std::int64_t n = 0; n < m.size(); ++n) out[static_cast<std::size_t>(n)] = m.test(n);
  return out;
}

/// Classic even-odd ray casting along +x with a half-open vertical edge
/// test.
inline bool point_in_polygon(const std::vector<Eigen::Vector2d>& poly, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& pi = poly[i];
    const auto& pj = poly[j];
    if ((pi.y() > y) != (pj.y() > y) &&
        x < (pj.x() - pi.x()) * (y - pi.y()) / (pj.y() - pi.y()) + pi.x()) {
      inside = !inside;
    }
  }
  return inside;
}

inline double distance_to_segment(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                                  const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

inline double distance_to_boundary(const std::vector<Eigen::Vector2d>& poly,
                                   const Eigen::Vector2d& p) {
  double best = INFINITY;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    best = std::min(best, distance_to_segment(p, poly[j], poly[i]));
  }
  return best;
}

/// Enumerates every voxel centre and keeps those within `radius`.
inline std::vector<std::int64_t> ball_voxels(const Grid& g, const segstudio::WorldPoint& c,
                                             double radius) {
  std::vector<std::int64_t> out;
  for (std::int64_t n = 0; n < g.voxel_count(); ++n) {
    const VoxelIndex v = g.unravel(n);
    const Eigen::Vector3d w = g.origin + double(v.i) * g.col_spacing * g.i_axis +
                              double(v.j) * g.row_spacing * g.j_axis +
                              double(v.k) * g.slice_spacing * g.i_axis.cross(g.j_axis);
    if ((w - c).norm() <= radius) out.push_back(n);
  }
  return out;
}

// Generators ----------------------------------------------------------------

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Eigen::Quaterniond q(n01(rng), n01(rng), n01(rng), n01(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Grid random_grid(std::mt19937_64& rng, std::int64_t max_dim) {
  std::uniform_int_distribution<std::int64_t> dim(1, max_dim);
  std::uniform_real_distribution<double> sp(0.3, 3.0);
  std::uniform_real_distribution<double> off(-200, 200);
  Grid g;
  g.cols = dim(rng);
  g.rows = dim(rng);
  g.slices = dim(rng);
  g.row_spacing = sp(rng);
  g.col_spacing = sp(rng);
  g.slice_spacing = sp(rng);
  g.origin = {off(rng), off(rng), off(rng)};
  const Eigen::Matrix3d r = random_rotation(rng);
  g.i_axis = r.col(0);
  g.j_axis = r.col(1);
  return g;
}

/// Random mask with a random fill density, so empty and full masks occur.
inline VoxelMask random_mask(std::mt19937_64& rng, const Grid& g) {
  VoxelMask m(g);
  std::uniform_real_distribution<double> u(0, 1);
  const double density = std::vector<double>{0.0, 0.02, 0.3, 0.5, 0.9, 1.0}[rng() % 6];
  for (std::int64_t n = 0; n < g.voxel_count(); ++n) {
    if (u(rng) < density) m.set(n);
  }
  return m;
}

/// Random simple polygon, star-shaped around a centre: one vertex per equal
/// angular sector with jitter, so consecutive angle gaps stay below pi.
inline std::vector<Eigen::Vector2d> random_simple_polygon(std::mt19937_64& rng,
                                                          double extent) {
  std::uniform_int_distribution<int> count(4, 24);
  std::uniform_real_distribution<double> unit(0, 1);
  const int n = count(rng);
  const double phase = 2 * M_PI * unit(rng);
  std::vector<double> angles;
  for (int k = 0; k < n; ++k) angles.push_back(phase + 2 * M_PI * (k + 0.9 * unit(rng)) / n);
  const Eigen::Vector2d centre{extent * (0.3 + 0.4 * unit(rng)), extent * (0.3 + 0.4 * unit(rng))};
  const double rmax = extent * 0.3;
  std::vector<Eigen::Vector2d> poly;
  for (double a : angles) {
    const double r = rmax * (0.2 + 0.8 * unit(rng));
    poly.push_back(centre + r * Eigen::Vector2d{std::cos(a), std::sin(a)});
  }
  return poly;
}

}  // namespace oracle
