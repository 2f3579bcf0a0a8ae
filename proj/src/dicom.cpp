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

#include "segstudio/dicom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

namespace segstudio {

namespace dicom {

namespace {

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;
constexpr std::string_view kImplementationUid = "1.2.826.0.1.3680043.10.1000.99";

bool has_long_length(const char vr[2]) {
  static constexpr const char* kLong[] = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                          "SV", "UC", "UR", "UT", "UN", "UV"};
  for (const char* v : kLong) {
    if (vr[0] == v[0] && vr[1] == v[1]) return true;
  }
  return false;
}

std::string tag_text(Tag t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "(%04X,%04X)", t.group, t.element);
  return buf;
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes, std::size_t pos = 0)
      : bytes_(bytes), pos_(pos) {}

  [[nodiscard]] bool done() const noexcept { return pos_ >= bytes_.size(); }
  [[nodiscard]] std::size_t pos() const noexcept { return pos_; }

  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int n = 3; n >= 0; --n) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(n)];
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  Tag peek_tag() {
    Reader r(bytes_, pos_);
    const std::uint16_t g = r.u16();
    return {g, r.u16()};
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("truncated DICOM stream");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

void skip_item_contents(Reader& r, std::uint32_t length);

// Skips the items of a sequence whose header has already been consumed.
void skip_sequence(Reader& r, std::uint32_t length) {
  if (length != kUndefinedLength) {
    r.take(length);
    return;
  }
  while (true) {
    const Tag t{r.u16(), r.u16()};
    const std::uint32_t len = r.u32();
    if (t == Tag{0xFFFE, 0xE0DD}) return;  // sequence delimiter
    if (t != Tag{0xFFFE, 0xE000}) throw ParseError("malformed sequence item", tag_text(t));
    skip_item_contents(r, len);
  }
}

// Returns false at an item delimiter.
bool read_element(Reader& r, Tag& tag, Element& out, bool keep_value);

void skip_item_contents(Reader& r, std::uint32_t length) {
  if (length != kUndefinedLength) {
    r.take(length);
    return;
  }
  Tag tag;
  Element ignored;
  while (read_element(r, tag, ignored, false)) {
  }
}

bool read_element(Reader& r, Tag& tag, Element& out, bool keep_value) {
  tag = {r.u16(), r.u16()};
  if (tag == Tag{0xFFFE, 0xE00D}) {  // item delimiter
    r.u32();
    return false;
  }
  auto vr = r.take(2);
  out.vr[0] = static_cast<char>(vr[0]);
  out.vr[1] = static_cast<char>(vr[1]);
  std::uint32_t length;
  if (has_long_length(out.vr)) {
    r.u16();
    length = r.u32();
  } else {
    length = r.u16();
  }
  const bool sequence = out.vr[0] == 'S' && out.vr[1] == 'Q';
  if (sequence) {
    skip_sequence(r, length);
    out.value.clear();
    return true;
  }
  if (length == kUndefinedLength) {
    if (tag == kPixelData) throw UnsupportedError("encapsulated (compressed) pixel data");
    throw UnsupportedError("undefined-length element", tag_text(tag));
  }
  auto value = r.take(length);
  if (keep_value) out.value.assign(value.begin(), value.end());
  return true;
}

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int n = 0; n < 4; ++n) out.push_back(static_cast<std::uint8_t>((v >> (8 * n)) & 0xff));
}

void put_element(Bytes& out, Tag tag, const Element& e) {
  put_u16(out, tag.group);
  put_u16(out, tag.element);
  out.push_back(static_cast<std::uint8_t>(e.vr[0]));
  out.push_back(static_cast<std::uint8_t>(e.vr[1]));
  if (has_long_length(e.vr)) {
    put_u16(out, 0);
    put_u32(out, static_cast<std::uint32_t>(e.value.size()));
  } else {
    if (e.value.size() > 0xFFFF) throw ArgumentError("element value too long", tag_text(tag));
    put_u16(out, static_cast<std::uint16_t>(e.value.size()));
  }
  out.insert(out.end(), e.value.begin(), e.value.end());
}

std::string trim(std::string_view s) {
  const auto is_pad = [](char c) { return c == ' ' || c == '\0'; };
  while (!s.empty() && is_pad(s.back())) s.remove_suffix(1);
  while (!s.empty() && is_pad(s.front())) s.remove_prefix(1);
  return std::string(s);
}

}  // namespace

void Dataset::set(Tag tag, std::string_view vr, Bytes value) {
  Element e;
  e.vr[0] = vr[0];
  e.vr[1] = vr[1];
  if (value.size() % 2 == 1) value.push_back(0);
  e.value = std::move(value);
  elements_[tag] = std::move(e);
}

void Dataset::set_string(Tag tag, std::string_view vr, std::string_view text) {
  Bytes value(text.begin(), text.end());
  if (value.size() % 2 == 1) value.push_back(vr == "UI" ? '\0' : ' ');
  set(tag, vr, std::move(value));
}

void Dataset::set_u16(Tag tag, std::uint16_t value) {
  Bytes b;
  put_u16(b, value);
  set(tag, "US", std::move(b));
}

const Element* Dataset::find(Tag tag) const {
  auto it = elements_.find(tag);
  return it == elements_.end() ? nullptr : &it->second;
}

std::optional<std::string> Dataset::optional_string(Tag tag) const {
  const Element* e = find(tag);
  if (!e) return std::nullopt;
  return trim(std::string_view(reinterpret_cast<const char*>(e->value.data()), e->value.size()));
}

std::string Dataset::string(Tag tag) const {
  auto s = optional_string(tag);
  if (!s) throw ParseError("missing required DICOM tag", tag_text(tag));
  return *s;
}

std::vector<double> Dataset::decimals(Tag tag) const {
  const std::string text = string(tag);
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\\', start);
    if (end == std::string::npos) end = text.size();
    const std::string part = trim(std::string_view(text).substr(start, end - start));
    char* stop = nullptr;
    const double v = std::strtod(part.c_str(), &stop);
    if (part.empty() || stop != part.c_str() + part.size() || !std::isfinite(v)) {
      throw ParseError("malformed decimal string", tag_text(tag) + " = " + text);
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

std::uint16_t Dataset::u16(Tag tag) const {
  const Element* e = find(tag);
  if (!e) throw ParseError("missing required DICOM tag", tag_text(tag));
  if (e->value.size() < 2) throw ParseError("short US value", tag_text(tag));
  return static_cast<std::uint16_t>(e->value[0] | (e->value[1] << 8));
}

Dataset read_part10(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 132 || std::memcmp(bytes.data() + 128, "DICM", 4) != 0) {
    throw ParseError("not a DICOM Part-10 file (missing DICM prefix)");
  }
  Reader r(bytes, 132);
  Dataset meta;
  while (!r.done() && r.peek_tag().group == 0x0002) {
    Tag tag;
    Element e;
    read_element(r, tag, e, true);
    meta.set(tag, std::string_view(e.vr, 2), std::move(e.value));
  }
  const std::string syntax = meta.string(kTransferSyntaxUid);
  if (syntax != kExplicitVrLittleEndian) {
    throw UnsupportedError("unsupported transfer syntax", syntax);
  }
  Dataset ds;
  while (!r.done()) {
    Tag tag;
    Element e;
    if (!read_element(r, tag, e, true)) throw ParseError("unexpected item delimiter");
    if (tag.group == 0xFFFE) throw ParseError("unexpected item tag at top level");
    ds.set(tag, std::string_view(e.vr, 2), std::move(e.value));
  }
  return ds;
}

Bytes write_part10(const Dataset& ds, std::string_view sop_class_uid) {
  Dataset meta;
  meta.set(Tag{0x0002, 0x0001}, "OB", Bytes{0x00, 0x01});
  meta.set_string(Tag{0x0002, 0x0002}, "UI", sop_class_uid);
  meta.set_string(Tag{0x0002, 0x0003}, "UI", ds.optional_string(kSopInstanceUid).value_or(""));
  meta.set_string(kTransferSyntaxUid, "UI", kExplicitVrLittleEndian);
  meta.set_string(Tag{0x0002, 0x0012}, "UI", kImplementationUid);

  Bytes group;
  for (const auto& [tag, e] : meta.elements()) put_element(group, tag, e);

  Bytes out(128, 0);
  for (char c : std::string_view("DICM")) out.push_back(static_cast<std::uint8_t>(c));
  Element length;
  length.vr[0] = 'U';
  length.vr[1] = 'L';
  put_u32(length.value, static_cast<std::uint32_t>(group.size()));
  put_element(out, Tag{0x0002, 0x0000}, length);
  out.insert(out.end(), group.begin(), group.end());
  for (const auto& [tag, e] : ds.elements()) {
    if (tag.group == 0x0002) continue;
    put_element(out, tag, e);
  }
  return out;
}

}  // namespace dicom

// Series assembly ------------------------------------------------------------

namespace {

constexpr double kSliceTolerance = 1e-3;  // mm
constexpr double kOrientationTolerance = 1e-3;

// Shortest decimal text that parses back to exactly `v`.
std::string decimal_text(double v) {
  char buf[32];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string decimal_list(std::initializer_list<double> values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += '\\';
    out += decimal_text(v);
  }
  return out;
}

struct SliceRecord {
  dicom::Dataset ds;
  Vec3<double> position;
  double height = 0;  // projection of position onto the slice normal
};

}  // namespace

void ImageSeries::validate() const {
  grid.validate();
  if (static_cast<std::int64_t>(voxels.size()) != grid.voxel_count()) {
    throw ArgumentError("voxel array length does not match grid");
  }
}

std::string pseudonymize(std::string_view patient_id, std::string_view salt) {
  std::string material(salt);
  material += '|';
  material += patient_id;
  return "anon-" + sha256_hex(material).substr(0, 16);
}

ImageSeries parse_series(std::span<const Bytes> files, const ParseOptions& options) {
  using namespace dicom;
  if (files.empty()) throw ArgumentError("no DICOM files supplied");

  std::vector<SliceRecord> slices;
  slices.reserve(files.size());
  for (const auto& f : files) slices.push_back({read_part10(f), {}, 0});

  const std::string series_uid = slices.front().ds.string(kSeriesInstanceUid);
  for (const auto& s : slices) {
    const std::string uid = s.ds.string(kSeriesInstanceUid);
    if (uid != series_uid) throw MixedSeriesError("upload mixes series", series_uid + " vs " + uid);
  }

  // Reference geometry from the first supplied slice; every slice must agree.
  const Dataset& ref = slices.front().ds;
  const auto rows = ref.u16(kRows);
  const auto cols = ref.u16(kColumns);
  const auto spacing = ref.decimals(kPixelSpacing);
  const auto iop = ref.decimals(kImageOrientationPatient);
  if (spacing.size() != 2) throw ParseError("PixelSpacing must have 2 values");
  if (iop.size() != 6) throw ParseError("ImageOrientationPatient must have 6 values");
  if (rows == 0 || cols == 0) throw ParseError("image has zero rows or columns");

  Vec3<double> i_axis{iop[0], iop[1], iop[2]};
  Vec3<double> j_axis{iop[3], iop[4], iop[5]};
  if (std::abs(i_axis.norm() - 1) > kOrientationTolerance ||
      std::abs(j_axis.norm() - 1) > kOrientationTolerance ||
      std::abs(i_axis.dot(j_axis)) > kOrientationTolerance) {
    throw GeometryError("ImageOrientationPatient is not orthonormal");
  }
  // Re-orthonormalise only text-rounded cosines; exact ones pass through.
  if (std::abs(i_axis.norm() - 1) > 1e-9 || std::abs(j_axis.norm() - 1) > 1e-9 ||
      std::abs(i_axis.dot(j_axis)) > 1e-9) {
    i_axis.normalize();
    j_axis = (j_axis - j_axis.dot(i_axis) * i_axis).normalized();
  }
  const Vec3<double> normal = i_axis.cross(j_axis);

  for (auto& s : slices) {
    if (s.ds.u16(kBitsAllocated) != 16) {
      throw UnsupportedError("only BitsAllocated=16 is supported",
                             std::to_string(s.ds.u16(kBitsAllocated)));
    }
    if (!s.ds.contains(kSopInstanceUid) || !s.ds.contains(kStudyInstanceUid)) {
      throw ParseError("missing SOP or Study Instance UID");
    }
    if (s.ds.u16(kRows) != rows || s.ds.u16(kColumns) != cols) {
      throw GeometryError("slices have different dimensions");
    }
    const auto sp = s.ds.decimals(kPixelSpacing);
    const auto o = s.ds.decimals(kImageOrientationPatient);
    if (sp.size() != 2 || std::abs(sp[0] - spacing[0]) > 1e-6 ||
        std::abs(sp[1] - spacing[1]) > 1e-6) {
      throw GeometryError("slices have different pixel spacing");
    }
    for (std::size_t n = 0; n < 6; ++n) {
      if (o.size() != 6 || std::abs(o[n] - iop[n]) > 1e-6) {
        throw GeometryError("slices have different orientation");
      }
    }
    const auto ipp = s.ds.decimals(kImagePositionPatient);
    if (ipp.size() != 3) throw ParseError("ImagePositionPatient must have 3 values");
    s.position = {ipp[0], ipp[1], ipp[2]};
    s.height = s.position.dot(normal);
  }

  std::sort(slices.begin(), slices.end(),
            [](const SliceRecord& a, const SliceRecord& b) { return a.height < b.height; });

  double slice_spacing = 1.0;
  if (slices.size() > 1) {
    slice_spacing = (slices.back().height - slices.front().height) /
                    static_cast<double>(slices.size() - 1);
    for (std::size_t n = 1; n < slices.size(); ++n) {
      const double gap = slices[n].height - slices[n - 1].height;
      if (gap <= kSliceTolerance) throw GeometryError("duplicate slice position");
      if (std::abs(gap - slice_spacing) > kSliceTolerance) {
        throw GeometryError("non-uniform slice spacing",
                            std::to_string(gap) + " vs " + std::to_string(slice_spacing));
      }
    }
    for (const auto& s : slices) {
      const Vec3<double> expected =
          slices.front().position + (s.height - slices.front().height) * normal;
      if ((s.position - expected).norm() > kSliceTolerance) {
        throw GeometryError("slice positions do not lie along the slice normal");
      }
    }
  } else if (ref.contains(kSpacingBetweenSlices)) {
    slice_spacing = ref.decimals(kSpacingBetweenSlices).at(0);
  } else if (ref.contains(kSliceThickness)) {
    slice_spacing = ref.decimals(kSliceThickness).at(0);
  }

  const SliceRecord& first = slices.front();
  ImageSeries series;
  series.series_id = series_uid;
  series.study_id = first.ds.string(kStudyInstanceUid);
  series.modality = first.ds.optional_string(kModality).value_or("OT");
  series.patient_pseudonym =
      pseudonymize(first.ds.optional_string(kPatientId).value_or(""), options.pseudonym_salt);

  Grid& g = series.grid;
  g.rows = rows;
  g.cols = cols;
  g.slices = static_cast<std::int64_t>(slices.size());
  g.row_spacing = spacing[0];
  g.col_spacing = spacing[1];
  g.slice_spacing = slice_spacing;
  g.origin = first.position;
  g.i_axis = i_axis;
  g.j_axis = j_axis;
  try {
    g.validate();
  } catch (const ArgumentError& e) {
    throw GeometryError(e.what(), e.detail());
  }

  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  series.voxels.resize(plane * slices.size());
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const Dataset& ds = slices[k].ds;
    const Element* pixels = ds.find(kPixelData);
    if (!pixels) throw ParseError("missing pixel data");
    if (pixels->value.size() < plane * 2) throw ParseError("pixel data shorter than Rows*Columns");
    const bool is_signed = ds.contains(kPixelRepresentation) && ds.u16(kPixelRepresentation) == 1;
    const double slope =
        ds.contains(kRescaleSlope) ? ds.decimals(kRescaleSlope).at(0) : 1.0;
    const double intercept =
        ds.contains(kRescaleIntercept) ? ds.decimals(kRescaleIntercept).at(0) : 0.0;
    const bool identity = slope == 1.0 && intercept == 0.0;
    for (std::size_t n = 0; n < plane; ++n) {
      const std::uint16_t raw =
          static_cast<std::uint16_t>(pixels->value[2 * n] | (pixels->value[2 * n + 1] << 8));
      const double stored = is_signed ? static_cast<double>(static_cast<std::int16_t>(raw))
                                      : static_cast<double>(raw);
      const double value = identity ? stored : std::round(stored * slope + intercept);
      if (value < std::numeric_limits<std::int16_t>::min() ||
          value > std::numeric_limits<std::int16_t>::max()) {
        throw UnsupportedError("rescaled intensity does not fit signed 16-bit",
                               std::to_string(value));
      }
      series.voxels[k * plane + n] = static_cast<std::int16_t>(value);
    }
  }
  return series;
}

std::vector<Bytes> write_series(const ImageSeries& series, std::string_view patient_id) {
  using namespace dicom;
  series.validate();
  const Grid& g = series.grid;
  if (g.rows > 0xFFFF || g.cols > 0xFFFF) throw ArgumentError("grid too large for DICOM");
  const auto o = orientation_cosines(g);
  const std::size_t plane = static_cast<std::size_t>(g.slice_size());

  std::vector<Bytes> files;
  files.reserve(static_cast<std::size_t>(g.slices));
  for (std::int64_t k = 0; k < g.slices; ++k) {
    Dataset ds;
    const std::string sop = series.series_id + "." + std::to_string(k + 1);
    const Vec3<double> pos = voxel_to_world(g, VoxelIndex{0, 0, k});
    ds.set_string(Tag{0x0008, 0x0016}, "UI", kCtImageStorage);
    ds.set_string(kSopInstanceUid, "UI", sop);
    ds.set_string(kModality, "CS", series.modality);
    ds.set_string(kPatientName, "PN", "ANONYMOUS");
    ds.set_string(kPatientId, "LO", patient_id);
    ds.set_string(kSliceThickness, "DS", decimal_text(g.slice_spacing));
    ds.set_string(kSpacingBetweenSlices, "DS", decimal_text(g.slice_spacing));
    ds.set_string(kStudyInstanceUid, "UI", series.study_id);
    ds.set_string(kSeriesInstanceUid, "UI", series.series_id);
    ds.set_string(kInstanceNumber, "IS", std::to_string(k + 1));
    ds.set_string(kImagePositionPatient, "DS", decimal_list({pos.x(), pos.y(), pos.z()}));
    ds.set_string(kImageOrientationPatient, "DS",
                  decimal_list({o[0], o[1], o[2], o[3], o[4], o[5]}));
    ds.set_u16(Tag{0x0028, 0x0002}, 1);  // SamplesPerPixel
    ds.set_string(Tag{0x0028, 0x0004}, "CS", "MONOCHROME2");
    ds.set_u16(kRows, static_cast<std::uint16_t>(g.rows));
    ds.set_u16(kColumns, static_cast<std::uint16_t>(g.cols));
    ds.set_string(kPixelSpacing, "DS", decimal_list({g.row_spacing, g.col_spacing}));
    ds.set_u16(kBitsAllocated, 16);
    ds.set_u16(Tag{0x0028, 0x0101}, 16);  // BitsStored
    ds.set_u16(Tag{0x0028, 0x0102}, 15);  // HighBit
    ds.set_u16(kPixelRepresentation, 1);
    ds.set_string(kRescaleIntercept, "DS", "0");
    ds.set_string(kRescaleSlope, "DS", "1");
    Bytes pixels;
    pixels.reserve(plane * 2);
    for (std::size_t n = 0; n < plane; ++n) {
      const auto v = static_cast<std::uint16_t>(series.voxels[static_cast<std::size_t>(k) * plane + n]);
      pixels.push_back(static_cast<std::uint8_t>(v & 0xff));
      pixels.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    ds.set(kPixelData, "OW", std::move(pixels));
    files.push_back(write_part10(ds, kCtImageStorage));
  }
  return files;
}

// Phantom ----------------------------------------------------------------------

namespace {

struct Extent {
  Vec3<double> lo, hi;
};

// World bounding box of the grid's voxel footprint (centres +- half a voxel).
Extent grid_extent(const Grid& g) {
  Extent e{Vec3<double>::Constant(INFINITY), Vec3<double>::Constant(-INFINITY)};
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3<double> ijk{(corner & 1) ? g.cols - 0.5 : -0.5, (corner & 2) ? g.rows - 0.5 : -0.5,
                           (corner & 4) ? g.slices - 0.5 : -0.5};
    const Vec3<double> w = index_to_world(g, ijk);
    e.lo = e.lo.cwiseMin(w);
    e.hi = e.hi.cwiseMax(w);
  }
  return e;
}

bool inside(const PhantomShape& shape, const Vec3<double>& p) {
  if (const auto* s = std::get_if<SphereShape>(&shape.geometry)) {
    return (p - s->center).norm() <= s->radius;
  }
  const auto& b = std::get<BoxShape>(shape.geometry);
  for (int a = 0; a < 3; ++a) {
    if (p[a] < b.corner[a] || p[a] > b.corner[a] + b.size[a]) return false;
  }
  return true;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.grid.validate();
  const Extent extent = grid_extent(spec.grid);
  constexpr double kTol = 1e-9;
  for (const auto& shape : spec.shapes) {
    Vec3<double> lo, hi;
    if (const auto* s = std::get_if<SphereShape>(&shape.geometry)) {
      if (!(s->radius >= 0)) throw ArgumentError("sphere radius must be non-negative");
      lo = s->center - Vec3<double>::Constant(s->radius);
      hi = s->center + Vec3<double>::Constant(s->radius);
    } else {
      const auto& b = std::get<BoxShape>(shape.geometry);
      if ((b.size.array() < 0).any()) throw ArgumentError("box size must be non-negative");
      lo = b.corner;
      hi = b.corner + b.size;
    }
    if (!lo.allFinite() || !hi.allFinite() || (lo.array() < extent.lo.array() - kTol).any() ||
        (hi.array() > extent.hi.array() + kTol).any()) {
      throw ArgumentError("phantom shape extends outside the grid", shape.roi_name);
    }
    if (shape.roi_name.empty()) throw ArgumentError("phantom shape needs an roi_name");
  }

  Phantom out;
  ImageSeries& series = out.rendering;
  series.study_id = spec.study_id;
  series.series_id = spec.series_id;
  series.modality = spec.modality;
  series.patient_pseudonym = pseudonymize(spec.patient_id, "");
  series.grid = spec.grid;
  series.voxels.assign(static_cast<std::size_t>(spec.grid.voxel_count()), spec.background);

  // ROI per distinct name, in order of first appearance.
  std::vector<std::size_t> roi_of_shape;
  SegmentationSet& gt = out.ground_truth;
  gt.series_ref = spec.series_id;
  gt.grid = spec.grid;
  gt.provenance = {ProvenanceSource::Manual, {}, {}, 0, now_us()};
  for (const auto& shape : spec.shapes) {
    std::size_t idx = 0;
    while (idx < gt.rois.size() && gt.rois[idx].roi.name != shape.roi_name) ++idx;
    if (idx == gt.rois.size()) {
      const int number = static_cast<int>(idx) + 1;
      gt.rois.push_back({Roi{number, shape.roi_name, palette_color(idx)},
                         VoxelMask(spec.grid)});
    }
    roi_of_shape.push_back(idx);
  }

  const Grid& g = spec.grid;
  for (std::int64_t n = 0; n < g.voxel_count(); ++n) {
    const Vec3<double> p = voxel_to_world(g, g.unravel(n));
    std::optional<std::size_t> last;
    for (std::size_t s = 0; s < spec.shapes.size(); ++s) {
      if (inside(spec.shapes[s], p)) last = s;
    }
    if (last) {
      series.voxels[static_cast<std::size_t>(n)] = spec.shapes[*last].intensity;
      gt.rois[roi_of_shape[*last]].mask.set(n);
    }
  }

  out.files = write_series(series, spec.patient_id);

  nlohmann::json files = nlohmann::json::array();
  for (std::size_t k = 0; k < out.files.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "slice_%04zu.dcm", k);
    files.push_back({{"name", name}, {"sha256", sha256_hex(out.files[k])}});
  }
  nlohmann::json rle = nlohmann::json::array();
  for (const auto& r : gt.rois) {
    rle.push_back({{"number", r.roi.number}, {"name", r.roi.name}, {"rle", rle_encode(r.mask)}});
  }
  out.manifest = {{"spec", phantom_spec_to_json(spec)},
                  {"files", std::move(files)},
                  {"ground_truth", std::move(rle)}};
  return out;
}

nlohmann::json phantom_spec_to_json(const PhantomSpec& spec) {
  using nlohmann::json;
  const auto o = orientation_cosines(spec.grid);
  json shapes = json::array();
  for (const auto& shape : spec.shapes) {
    json s = {{"intensity", shape.intensity}, {"roi_name", shape.roi_name}};
    if (const auto* sp = std::get_if<SphereShape>(&shape.geometry)) {
      s["type"] = "sphere";
      s["center"] = {sp->center.x(), sp->center.y(), sp->center.z()};
      s["radius"] = sp->radius;
    } else {
      const auto& b = std::get<BoxShape>(shape.geometry);
      s["type"] = "box";
      s["corner"] = {b.corner.x(), b.corner.y(), b.corner.z()};
      s["size"] = {b.size.x(), b.size.y(), b.size.z()};
    }
    shapes.push_back(std::move(s));
  }
  return {{"grid",
           {{"rows", spec.grid.rows},
            {"cols", spec.grid.cols},
            {"slices", spec.grid.slices},
            {"pixel_spacing", {spec.grid.row_spacing, spec.grid.col_spacing}},
            {"slice_spacing", spec.grid.slice_spacing},
            {"origin", {spec.grid.origin.x(), spec.grid.origin.y(), spec.grid.origin.z()}},
            {"orientation", {o[0], o[1], o[2], o[3], o[4], o[5]}}}},
          {"background", spec.background},
          {"shapes", std::move(shapes)},
          {"study_id", spec.study_id},
          {"series_id", spec.series_id},
          {"patient_id", spec.patient_id},
          {"modality", spec.modality}};
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& doc) {
  try {
    PhantomSpec spec;
    const auto& g = doc.at("grid");
    spec.grid.rows = g.at("rows").get<std::int64_t>();
    spec.grid.cols = g.at("cols").get<std::int64_t>();
    spec.grid.slices = g.at("slices").get<std::int64_t>();
    spec.grid.row_spacing = g.at("pixel_spacing").at(0).get<double>();
    spec.grid.col_spacing = g.at("pixel_spacing").at(1).get<double>();
    spec.grid.slice_spacing = g.at("slice_spacing").get<double>();
    if (g.contains("origin")) {
      const auto& o = g["origin"];
      spec.grid.origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    }
    if (g.contains("orientation")) {
      const auto& c = g["orientation"];
      spec.grid.i_axis = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
      spec.grid.j_axis = {c.at(3).get<double>(), c.at(4).get<double>(), c.at(5).get<double>()};
    }
    spec.background = doc.value("background", std::int16_t{0});
    auto vec = [](const nlohmann::json& a) {
      return Vec3<double>{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
    };
    for (const auto& s : doc.value("shapes", nlohmann::json::array())) {
      PhantomShape shape;
      shape.intensity = s.at("intensity").get<std::int16_t>();
      shape.roi_name = s.at("roi_name").get<std::string>();
      const std::string type = s.at("type").get<std::string>();
      if (type == "sphere") {
        shape.geometry = SphereShape{vec(s.at("center")), s.at("radius").get<double>()};
      } else if (type == "box") {
        shape.geometry = BoxShape{vec(s.at("corner")), vec(s.at("size"))};
      } else {
        throw ParseError("unknown phantom shape type", type);
      }
      spec.shapes.push_back(std::move(shape));
    }
    if (doc.contains("study_id")) spec.study_id = doc["study_id"].get<std::string>();
    if (doc.contains("series_id")) spec.series_id = doc["series_id"].get<std::string>();
    if (doc.contains("patient_id")) spec.patient_id = doc["patient_id"].get<std::string>();
    if (doc.contains("modality")) spec.modality = doc["modality"].get<std::string>();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed phantom spec", e.what());
  }
}

PhantomSpec sphere_phantom_spec(std::string_view series_suffix) {
  PhantomSpec spec;
  spec.grid.rows = spec.grid.cols = spec.grid.slices = 32;
  spec.background = 0;
  spec.shapes.push_back({SphereShape{{16, 16, 16}, 8.0}, 1000, "sphere"});
  spec.study_id = "1.2.826.0.1.3680043.10.1000.1." + std::string(series_suffix);
  spec.series_id = spec.study_id + ".1";
  return spec;
}

}  // namespace segstudio
