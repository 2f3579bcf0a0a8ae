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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "segstudio/geometry.hpp"
#include "segstudio/mask.hpp"
#include "segstudio/util.hpp"

namespace segstudio {

/// One reconstructed 3D acquisition. Voxels are post-rescale intensities in
/// grid storage order.
struct ImageSeries {
  std::string study_id;
  std::string series_id;
  std::string modality;
  std::string patient_pseudonym;
  Grid grid;
  std::vector<std::int16_t> voxels;

  void validate() const;
  friend bool operator==(const ImageSeries&, const ImageSeries&) = default;
};

// DICOM Part-10 ------------------------------------------------------------

namespace dicom {

inline constexpr std::string_view kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";
inline constexpr std::string_view kCtImageStorage = "1.2.840.10008.5.1.4.1.1.2";

struct Tag {
  std::uint16_t group = 0;
  std::uint16_t element = 0;
  friend auto operator<=>(const Tag&, const Tag&) = default;
};

inline constexpr Tag kTransferSyntaxUid{0x0002, 0x0010};
inline constexpr Tag kSopInstanceUid{0x0008, 0x0018};
inline constexpr Tag kModality{0x0008, 0x0060};
inline constexpr Tag kPatientId{0x0010, 0x0020};
inline constexpr Tag kPatientName{0x0010, 0x0010};
inline constexpr Tag kSliceThickness{0x0018, 0x0050};
inline constexpr Tag kSpacingBetweenSlices{0x0018, 0x0088};
inline constexpr Tag kStudyInstanceUid{0x0020, 0x000D};
inline constexpr Tag kSeriesInstanceUid{0x0020, 0x000E};
inline constexpr Tag kInstanceNumber{0x0020, 0x0013};
inline constexpr Tag kImagePositionPatient{0x0020, 0x0032};
inline constexpr Tag kImageOrientationPatient{0x0020, 0x0037};
inline constexpr Tag kRows{0x0028, 0x0010};
inline constexpr Tag kColumns{0x0028, 0x0011};
inline constexpr Tag kPixelSpacing{0x0028, 0x0030};
inline constexpr Tag kBitsAllocated{0x0028, 0x0100};
inline constexpr Tag kPixelRepresentation{0x0028, 0x0103};
inline constexpr Tag kRescaleIntercept{0x0028, 0x1052};
inline constexpr Tag kRescaleSlope{0x0028, 0x1053};
inline constexpr Tag kPixelData{0x7FE0, 0x0010};

struct Element {
  char vr[2] = {'U', 'N'};
  Bytes value;
};

/// Flat top-level dataset; nested sequences are skipped on read.
class Dataset {
 public:
  void set(Tag tag, std::string_view vr, Bytes value);
  void set_string(Tag tag, std::string_view vr, std::string_view text);
  void set_u16(Tag tag, std::uint16_t value);

  [[nodiscard]] bool contains(Tag tag) const { return elements_.count(tag) != 0; }
  [[nodiscard]] const Element* find(Tag tag) const;

  /// Trimmed text value; throws ParseError when the tag is absent.
  [[nodiscard]] std::string string(Tag tag) const;
  [[nodiscard]] std::optional<std::string> optional_string(Tag tag) const;
  /// Backslash-separated decimal strings (DS).
  [[nodiscard]] std::vector<double> decimals(Tag tag) const;
  [[nodiscard]] std::uint16_t u16(Tag tag) const;

  [[nodiscard]] const std::map<Tag, Element>& elements() const noexcept { return elements_; }

 private:
  std::map<Tag, Element> elements_;
};

/// Reads a Part-10 file: 128-byte preamble, "DICM", explicit-VR little-endian
/// meta group, then an explicit-VR little-endian dataset. Any other transfer
/// syntax raises UnsupportedError.
Dataset read_part10(std::span<const std::uint8_t> bytes);

/// Serialises a dataset as a Part-10 file in explicit-VR little-endian.
/// Group 0002 elements in `ds` are ignored; the meta header is generated.
Bytes write_part10(const Dataset& ds, std::string_view sop_class_uid);

}  // namespace dicom

struct ParseOptions {
  /// Mixed into the patient pseudonym hash.
  std::string pseudonym_salt;
};

/// Assembles one series from Part-10 slice payloads: slices are sorted by
/// their projection on the slice normal, rescale is applied and the grid is
/// built from the first slice's geometry.
///
/// Errors: MixedSeriesError for more than one SeriesInstanceUID,
/// GeometryError for inconsistent or non-uniform slice geometry,
/// UnsupportedError for unsupported encodings, ParseError for missing tags.
ImageSeries parse_series(std::span<const Bytes> files, const ParseOptions& options = {});

/// Writes one Part-10 file per slice of `series`.
std::vector<Bytes> write_series(const ImageSeries& series, std::string_view patient_id);

std::string pseudonymize(std::string_view patient_id, std::string_view salt);

// Phantom ------------------------------------------------------------------

struct SphereShape {
  WorldPoint center = WorldPoint::Zero();
  double radius = 0;
};

struct BoxShape {
  WorldPoint corner = WorldPoint::Zero();  // minimum corner in world mm
  WorldPoint size = WorldPoint::Zero();
};

struct PhantomShape {
  std::variant<SphereShape, BoxShape> geometry;
  std::int16_t intensity = 0;
  std::string roi_name;
};

struct PhantomSpec {
  Grid grid;
  std::int16_t background = 0;
  std::vector<PhantomShape> shapes;
  std::string study_id = "1.2.826.0.1.3680043.10.1000.1";
  std::string series_id = "1.2.826.0.1.3680043.10.1000.1.1";
  std::string patient_id = "PHANTOM";
  std::string modality = "CT";
};

struct Phantom {
  std::vector<Bytes> files;
  ImageSeries rendering;          // in-memory volume the files encode
  SegmentationSet ground_truth;   // one ROI per distinct roi_name
  nlohmann::json manifest;        // spec, file checksums, ground-truth RLE
};

/// Renders `spec` voxel by voxel (centre test, inclusive boundary, later
/// shapes overwrite earlier ones). Throws ArgumentError when a shape leaves
/// the grid extent.
Phantom generate_phantom(const PhantomSpec& spec);

nlohmann::json phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& doc);

/// Sphere phantom used by demos and the end-to-end tests: 32^3 at 1 mm, one
/// sphere of radius 8 mm and intensity 1000 on a background of 0.
PhantomSpec sphere_phantom_spec(std::string_view series_suffix = "1");

}  // namespace segstudio
