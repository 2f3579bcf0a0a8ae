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

#include <algorithm>
#include <random>

#include "../oracles.hpp"
#include "segstudio/dicom.hpp"

using namespace segstudio;

namespace {

ImageSeries small_series(std::int64_t slices) {
  ImageSeries s;
  s.study_id = "1.2.3";
  s.series_id = "1.2.3.4";
  s.modality = "CT";
  s.grid.rows = 3;
  s.grid.cols = 4;
  s.grid.slices = slices;
  s.grid.row_spacing = 0.7;
  s.grid.col_spacing = 0.9;
  s.grid.slice_spacing = 2.5;
  s.grid.origin = {-10.5, 3.25, 100};
  s.voxels.resize(static_cast<std::size_t>(s.grid.voxel_count()));
  for (std::size_t n = 0; n < s.voxels.size(); ++n) {
    s.voxels[n] = static_cast<std::int16_t>(int(n * 37 % 4000) - 1024);
  }
  return s;
}

}  // namespace

TEST_CASE("three consistent slices parse into one series") {
  const ImageSeries s = small_series(3);
  const auto files = write_series(s, "PATIENT-7");
  REQUIRE(files.size() == 3);
  const ImageSeries parsed = parse_series(files);
  CHECK(parsed.grid.slices == 3);
  CHECK(parsed.grid == s.grid);
  CHECK(parsed.voxels == s.voxels);
  CHECK(parsed.series_id == s.series_id);
  CHECK(parsed.study_id == s.study_id);
  CHECK(parsed.modality == "CT");
  CHECK(parsed.patient_pseudonym == pseudonymize("PATIENT-7", ""));
  CHECK(parsed.patient_pseudonym.find("PATIENT") == std::string::npos);
}

TEST_CASE("slice order does not matter") {
  const ImageSeries s = small_series(6);
  auto files = write_series(s, "P");
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(files.begin(), files.end(), rng);
    CHECK(parse_series(files) == parse_series(write_series(s, "P")));
  }
}

TEST_CASE("mixed series are rejected") {
  ImageSeries a = small_series(2);
  ImageSeries b = small_series(2);
  b.series_id = "1.2.3.5";
  auto files = write_series(a, "P");
  files.push_back(write_series(b, "P")[0]);
  CHECK_THROWS_AS(parse_series(files), MixedSeriesError);
}

TEST_CASE("non-uniform spacing is rejected") {
  ImageSeries s = small_series(4);
  auto files = write_series(s, "P");
  files.erase(files.begin() + 2);  // leaves a gap
  CHECK_THROWS_AS(parse_series(files), GeometryError);

  auto dup = write_series(s, "P");
  dup.push_back(dup[1]);
  CHECK_THROWS_AS(parse_series(dup), GeometryError);
}

TEST_CASE("unsupported transfer syntax and missing tags") {
  const ImageSeries s = small_series(1);
  Bytes file = write_series(s, "P")[0];
  // Patch the transfer syntax UID to implicit VR little endian (same length
  // after padding: "1.2.840.10008.1.2" + NUL vs "1.2.840.10008.1.2.1" + NUL).
  const std::string explicit_uid = "1.2.840.10008.1.2.1";
  auto it = std::search(file.begin(), file.end(), explicit_uid.begin(), explicit_uid.end());
  REQUIRE(it != file.end());
  std::copy_n("1.2.840.10008.1.2\0\0", 19, it);
  const std::vector<Bytes> one{file};
  CHECK_THROWS_AS(parse_series(one), UnsupportedError);

  dicom::Dataset ds = dicom::read_part10(write_series(s, "P")[0]);
  dicom::Dataset stripped;
  for (const auto& [tag, e] : ds.elements()) {
    if (tag == dicom::kPixelSpacing) continue;
    stripped.set(tag, std::string_view(e.vr, 2), e.value);
  }
  const std::vector<Bytes> missing{dicom::write_part10(stripped, dicom::kCtImageStorage)};
  CHECK_THROWS_AS(parse_series(missing), ParseError);

  const std::vector<Bytes> junk{Bytes(200, 7)};
  CHECK_THROWS_AS(parse_series(junk), ParseError);
}

TEST_CASE("rescale slope and intercept are applied") {
  ImageSeries s = small_series(1);
  for (auto& v : s.voxels) v = static_cast<std::int16_t>(std::abs(v) % 3000);
  dicom::Dataset ds = dicom::read_part10(write_series(s, "P")[0]);
  ds.set_string(dicom::kRescaleIntercept, "DS", "-1024");
  ds.set_string(dicom::kRescaleSlope, "DS", "1");
  const std::vector<Bytes> files{dicom::write_part10(ds, dicom::kCtImageStorage)};
  const ImageSeries parsed = parse_series(files);
  for (std::size_t n = 0; n < s.voxels.size(); ++n) {
    REQUIRE(parsed.voxels[n] == s.voxels[n] - 1024);
  }
}

TEST_CASE("oblique series round-trip") {
  std::mt19937_64 rng(4);
  ImageSeries s = small_series(5);
  const Eigen::Matrix3d r = oracle::random_rotation(rng);
  s.grid.i_axis = r.col(0);
  s.grid.j_axis = r.col(1);
  const ImageSeries parsed = parse_series(write_series(s, "P"));
  CHECK(parsed.voxels == s.voxels);
  CHECK((parsed.grid.i_axis - s.grid.i_axis).norm() < 1e-12);
  CHECK(std::abs(parsed.grid.slice_spacing - s.grid.slice_spacing) < 1e-9);
  CHECK((parsed.grid.origin - s.grid.origin).norm() < 1e-12);
}

TEST_CASE("sphere phantom ground truth matches distance enumeration") {
  const PhantomSpec spec = sphere_phantom_spec();
  const Phantom p = generate_phantom(spec);
  REQUIRE(p.ground_truth.rois.size() == 1);
  const VoxelMask& gt = p.ground_truth.rois[0].mask;
  // Count of 1 mm voxel centres within 8 mm of (16,16,16), enumerated in
  // Python: sum over i,j,k in [0,32) of dist <= 8.
  CHECK(gt.popcount() == 2109);
  const auto expected = oracle::ball_voxels(spec.grid, {16, 16, 16}, 8.0);
  CHECK(static_cast<std::int64_t>(expected.size()) == gt.popcount());
  for (auto n : expected) REQUIRE(gt.test(n));
  for (std::int64_t n = 0; n < gt.size(); ++n) {
    REQUIRE(p.rendering.voxels[static_cast<std::size_t>(n)] == (gt.test(n) ? 1000 : 0));
  }

  const ImageSeries parsed = parse_series(p.files);
  CHECK(parsed.voxels == p.rendering.voxels);
  CHECK(parsed.grid == p.rendering.grid);
  CHECK(p.manifest["files"].size() == 32);
  CHECK(p.manifest["ground_truth"][0]["rle"].get<RleRuns>() == rle_encode(gt));
}

TEST_CASE("phantom edge cases") {
  PhantomSpec spec;
  spec.grid.rows = spec.grid.cols = spec.grid.slices = 5;
  spec.background = -100;
  Phantom empty = generate_phantom(spec);
  CHECK(empty.ground_truth.rois.empty());
  CHECK(std::all_of(empty.rendering.voxels.begin(), empty.rendering.voxels.end(),
                    [](std::int16_t v) { return v == -100; }));

  spec.shapes.push_back({BoxShape{{1, 1, 1}, {2, 2, 2}}, 300, "box"});
  CHECK(generate_phantom(spec).ground_truth.rois[0].mask.popcount() == 27);

  // Later shapes overwrite earlier ones, and the earlier ROI loses the voxel.
  spec.shapes.push_back({SphereShape{{2, 2, 2}, 0.0}, 50, "dot"});
  const Phantom both = generate_phantom(spec);
  CHECK(both.ground_truth.rois[0].mask.popcount() == 26);
  CHECK(both.ground_truth.rois[1].mask.popcount() == 1);
  CHECK(both.rendering.voxels[static_cast<std::size_t>(spec.grid.linear({2, 2, 2}))] == 50);

  spec.shapes.push_back({SphereShape{{2, 2, 2}, 10.0}, 1, "huge"});
  CHECK_THROWS_AS(generate_phantom(spec), ArgumentError);
}

TEST_CASE("phantom spec json round-trip") {
  PhantomSpec spec = sphere_phantom_spec("9");
  spec.shapes.push_back({BoxShape{{1, 2, 3}, {4, 5, 6}}, -7, "box"});
  const PhantomSpec back = phantom_spec_from_json(phantom_spec_to_json(spec));
  CHECK(back.grid == spec.grid);
  CHECK(back.shapes.size() == 2);
  CHECK(back.series_id == spec.series_id);
  CHECK(generate_phantom(back).rendering == generate_phantom(spec).rendering);
}
