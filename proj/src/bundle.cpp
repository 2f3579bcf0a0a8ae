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

#include "segstudio/bundle.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "segstudio/analysis.hpp"
#include "segstudio/exchange.hpp"

namespace segstudio {

using nlohmann::json;

namespace {

constexpr std::size_t kBlock = 512;

void put_octal(std::uint8_t* field, std::size_t width, std::uint64_t value) {
  // width - 1 digits plus a terminating NUL
  std::snprintf(reinterpret_cast<char*>(field), width, "%0*llo", static_cast<int>(width - 1),
                static_cast<unsigned long long>(value));
}

std::uint64_t get_octal(const std::uint8_t* field, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t n = 0; n < width && field[n] >= '0' && field[n] <= '7'; ++n) {
    v = v * 8 + static_cast<std::uint64_t>(field[n] - '0');
  }
  return v;
}

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

json file_entry(const TarEntry& e) {
  return {{"name", e.name}, {"sha256", sha256_hex(e.data)}, {"bytes", e.data.size()}};
}

}  // namespace

Bytes write_tar(const std::vector<TarEntry>& entries, std::int64_t mtime_s) {
  Bytes out;
  for (const auto& e : entries) {
    std::uint8_t h[kBlock] = {};
    std::string name = e.name, prefix;
    if (name.size() > 100) {
      const auto cut = name.rfind('/', 155);
      if (cut == std::string::npos || name.size() - cut - 1 > 100) {
        throw ArgumentError("archive member name too long", e.name);
      }
      prefix = name.substr(0, cut);
      name = name.substr(cut + 1);
    }
    std::memcpy(h, name.data(), name.size());
    put_octal(h + 100, 8, 0644);
    put_octal(h + 108, 8, 0);
    put_octal(h + 116, 8, 0);
    put_octal(h + 124, 12, e.data.size());
    put_octal(h + 136, 12, static_cast<std::uint64_t>(mtime_s));
    std::memset(h + 148, ' ', 8);
    h[156] = '0';
    std::memcpy(h + 257, "ustar", 6);
    std::memcpy(h + 263, "00", 2);
    std::memcpy(h + 345, prefix.data(), prefix.size());
    unsigned sum = 0;
    for (std::uint8_t b : h) sum += b;
    std::snprintf(reinterpret_cast<char*>(h + 148), 8, "%06o", sum);
    h[155] = ' ';
    out.insert(out.end(), h, h + kBlock);
    out.insert(out.end(), e.data.begin(), e.data.end());
    out.resize(out.size() + (kBlock - e.data.size() % kBlock) % kBlock, 0);
  }
  out.resize(out.size() + 2 * kBlock, 0);
  return out;
}

std::vector<TarEntry> read_tar(std::span<const std::uint8_t> archive) {
  std::vector<TarEntry> out;
  std::size_t pos = 0;
  while (pos + kBlock <= archive.size()) {
    const std::uint8_t* h = archive.data() + pos;
    if (std::all_of(h, h + kBlock, [](std::uint8_t b) { return b == 0; })) break;
    unsigned sum = 0;
    for (std::size_t n = 0; n < kBlock; ++n) sum += (n >= 148 && n < 156) ? ' ' : h[n];
    if (sum != get_octal(h + 148, 8)) throw CodecError("tar header checksum mismatch");
    const auto cstr = [](const std::uint8_t* p, std::size_t max) {
      return std::string(reinterpret_cast<const char*>(p),
                         strnlen(reinterpret_cast<const char*>(p), max));
    };
    TarEntry e;
    const std::string prefix = cstr(h + 345, 155);
    e.name = prefix.empty() ? cstr(h, 100) : prefix + "/" + cstr(h, 100);
    const std::uint64_t size = get_octal(h + 124, 12);
    pos += kBlock;
    if (pos + size > archive.size()) throw CodecError("tar member truncated", e.name);
    e.data.assign(archive.begin() + static_cast<std::ptrdiff_t>(pos),
                  archive.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += (size + kBlock - 1) / kBlock * kBlock;
    out.push_back(std::move(e));
  }
  return out;
}

ExportBundle export_bundle(const Store& store, const ExportRequest& req) {
  const SeriesSummary series = store.series_info(req.series_id);
  const std::vector<VersionEntry> lineage = store.list_versions(req.series_id);
  auto entry_of = [&](std::int64_t v) -> const VersionEntry& {
    auto it = std::find_if(lineage.begin(), lineage.end(),
                           [&](const VersionEntry& e) { return e.version == v; });
    if (it == lineage.end()) {
      throw NotFoundError("segmentation version not found", req.series_id + " v" + std::to_string(v));
    }
    return *it;
  };

  const SegmentationSet pred = store.get_segmentation(req.series_id, req.pred_version);
  const SegmentationSet corrected = store.get_segmentation(req.series_id, req.corrected_version);
  std::optional<SegmentationSet> gt;
  if (req.gt_version) gt = store.get_segmentation(req.series_id, *req.gt_version);
  const SegmentationSet& reference = gt ? *gt : corrected;

  const Evaluation before = evaluate(pred, reference);
  const Evaluation after = evaluate(corrected, reference);

  std::vector<TarEntry> files;
  auto add_mask = [&](const std::string& role, const SegmentationSet& set) {
    const std::string name = "masks/" + role + "-v" + std::to_string(set.version) + ".json";
    files.push_back({name, to_bytes(segmentation_to_json(set).dump())});
    return name;
  };
  auto version_json = [&](const SegmentationSet& set, const std::string& file) {
    const VersionEntry& e = entry_of(set.version);
    return json{{"version", e.version},
                {"parent_version", e.parent_version ? json(*e.parent_version) : json(nullptr)},
                {"provenance", provenance_to_json(e.provenance)},
                {"blob_sha256", e.blob},
                {"file", file}};
  };

  json versions = json::object();
  versions["pred"] = version_json(pred, add_mask("pred", pred));
  versions["corrected"] = version_json(corrected, add_mask("corrected", corrected));
  if (gt) versions["gt"] = version_json(*gt, add_mask("gt", *gt));

  if (req.include_images) {
    const ImageSeries img = store.get_series(req.series_id);
    Bytes volume(img.voxels.size() * 2);
    for (std::size_t n = 0; n < img.voxels.size(); ++n) {
      const auto v = static_cast<std::uint16_t>(img.voxels[n]);
      volume[2 * n] = static_cast<std::uint8_t>(v & 0xff);
      volume[2 * n + 1] = static_cast<std::uint8_t>(v >> 8);
    }
    files.push_back({"images/volume.bin", std::move(volume)});
    const json meta = {{"series_id", img.series_id},
                       {"dtype", "int16le"},
                       {"grid", grid_to_json(img.grid)}};
    files.push_back({"images/series.meta", to_bytes(meta.dump(2))});
  }

  // Edits between the prediction and the correction, oldest first.
  json edits = json::array();
  for (std::optional<std::int64_t> v = req.corrected_version; v && *v != req.pred_version;) {
    const VersionEntry& e = entry_of(*v);
    edits.insert(edits.begin(), json{{"version", e.version},
                                     {"source", to_string(e.provenance.source)},
                                     {"created_at_us", e.provenance.created_at_us},
                                     {"created_at", format_timestamp(e.provenance.created_at_us)}});
    v = e.parent_version;
  }

  json per_roi = json::array();
  for (const auto& r : before.report.rois) {
    json row = {{"roi", r.roi_name}, {"dice_before", r.dice}, {"dice_after", nullptr}};
    for (const auto& a : after.report.rois) {
      if (a.roi_name == r.roi_name) row["dice_after"] = a.dice;
    }
    per_roi.push_back(std::move(row));
  }

  auto optional_number = [](const std::optional<double>& d) { return d ? json(*d) : json(nullptr); };
  const std::int64_t now = now_us();
  json manifest = {
      {"format", kBundleFormat},
      {"format_version", 1},
      {"created_at", format_timestamp(now)},
      {"series", {{"series_id", series.series_id},
                  {"study_id", series.study_id},
                  {"modality", series.modality},
                  {"patient_pseudonym", series.patient_pseudonym},
                  {"grid", grid_to_json(series.grid)},
                  {"blob_sha256", series.blob}}},
      {"versions", std::move(versions)},
      {"reference", gt ? "gt" : "corrected"},
      {"model_provenance", provenance_to_json(entry_of(req.pred_version).provenance)},
      {"dice_before", optional_number(before.report.mean_dice)},
      {"dice_after", optional_number(after.report.mean_dice)},
      {"per_roi", std::move(per_roi)},
      {"edits", std::move(edits)},
      {"include_images", req.include_images},
      {"files", json::array()}};
  for (const auto& f : files) manifest["files"].push_back(file_entry(f));

  files.insert(files.begin(), TarEntry{"manifest.json", to_bytes(manifest.dump(2))});
  return {write_tar(files, now / 1'000'000), std::move(manifest)};
}

}  // namespace segstudio
