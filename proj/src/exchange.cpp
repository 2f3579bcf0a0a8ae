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

#include "segstudio/exchange.hpp"

#include "segstudio/util.hpp"

namespace segstudio {

using nlohmann::json;

json grid_to_json(const Grid& grid) {
  const auto o = orientation_cosines(grid);
  return {{"rows", grid.rows},
          {"cols", grid.cols},
          {"slices", grid.slices},
          {"pixel_spacing", {grid.row_spacing, grid.col_spacing}},
          {"slice_spacing", grid.slice_spacing},
          {"origin", {grid.origin.x(), grid.origin.y(), grid.origin.z()}},
          {"orientation", {o[0], o[1], o[2], o[3], o[4], o[5]}}};
}

Grid grid_from_json(const json& doc) {
  try {
    Grid g;
    g.rows = doc.at("rows").get<std::int64_t>();
    g.cols = doc.at("cols").get<std::int64_t>();
    g.slices = doc.at("slices").get<std::int64_t>();
    const auto& ps = doc.at("pixel_spacing");
    if (ps.size() != 2) throw ParseError("pixel_spacing must have 2 entries");
    g.row_spacing = ps[0].get<double>();
    g.col_spacing = ps[1].get<double>();
    g.slice_spacing = doc.at("slice_spacing").get<double>();
    const auto& o = doc.at("origin");
    if (o.size() != 3) throw ParseError("origin must have 3 entries");
    g.origin = {o[0].get<double>(), o[1].get<double>(), o[2].get<double>()};
    const auto& c = doc.at("orientation");
    if (c.size() != 6) throw ParseError("orientation must have 6 entries");
    g.i_axis = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
    g.j_axis = {c[3].get<double>(), c[4].get<double>(), c[5].get<double>()};
    g.validate();
    return g;
  } catch (const json::exception& e) {
    throw ParseError("malformed grid", e.what());
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("invalid grid: ") + e.what(), e.detail());
  }
}

json provenance_to_json(const Provenance& p) {
  json out = {{"source", to_string(p.source)},
              {"created_at_us", p.created_at_us},
              {"created_at", format_timestamp(p.created_at_us)}};
  if (p.source == ProvenanceSource::Model) {
    out["model_id"] = p.model_id;
    out["model_version"] = p.model_version;
  }
  if (p.source == ProvenanceSource::Edited) out["edited_from"] = p.edited_from;
  return out;
}

Provenance provenance_from_json(const json& doc) {
  try {
    Provenance p;
    p.source = provenance_source_from_string(doc.at("source").get<std::string>());
    p.created_at_us = doc.value("created_at_us", std::int64_t{0});
    if (p.source == ProvenanceSource::Model) {
      p.model_id = doc.at("model_id").get<std::string>();
      p.model_version = doc.value("model_version", std::string{});
    }
    if (p.source == ProvenanceSource::Edited) {
      p.edited_from = doc.at("edited_from").get<std::int64_t>();
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseError("malformed provenance", e.what());
  }
}

json segmentation_to_json(const SegmentationSet& set) {
  json rois = json::array();
  for (const auto& r : set.rois) {
    rois.push_back({{"number", r.roi.number},
                    {"name", r.roi.name},
                    {"color", {r.roi.color.r, r.roi.color.g, r.roi.color.b}},
                    {"rle", rle_encode(r.mask)}});
  }
  return {{"format", kSegmentationFormat},
          {"format_version", kSegmentationFormatVersion},
          {"series_id", set.series_ref},
          {"grid", grid_to_json(set.grid)},
          {"version", set.version},
          {"parent_version", set.parent_version ? json(*set.parent_version) : json(nullptr)},
          {"provenance", provenance_to_json(set.provenance)},
          {"rois", std::move(rois)}};
}

SegmentationSet segmentation_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw ParseError("segmentation document must be a JSON object");
    if (doc.contains("format") && doc["format"] != kSegmentationFormat) {
      throw ParseError("unexpected document format", doc["format"].dump());
    }
    if (doc.value("format_version", kSegmentationFormatVersion) != kSegmentationFormatVersion) {
      throw UnsupportedError("unsupported segmentation format version");
    }
    SegmentationSet set;
    set.series_ref = doc.value("series_id", std::string{});
    set.grid = grid_from_json(doc.at("grid"));
    set.version = doc.value("version", std::int64_t{0});
    if (doc.contains("parent_version") && !doc["parent_version"].is_null()) {
      set.parent_version = doc["parent_version"].get<std::int64_t>();
    }
    if (doc.contains("provenance")) set.provenance = provenance_from_json(doc["provenance"]);
    for (const auto& r : doc.at("rois")) {
      RoiMask entry;
      entry.roi.number = r.at("number").get<int>();
      entry.roi.name = r.at("name").get<std::string>();
      const auto& c = r.at("color");
      if (c.size() != 3) throw ParseError("ROI color must be [r, g, b]");
      entry.roi.color = {c[0].get<std::uint8_t>(), c[1].get<std::uint8_t>(),
                         c[2].get<std::uint8_t>()};
      const auto runs = r.at("rle").get<std::vector<std::uint64_t>>();
      entry.mask = rle_decode(runs, set.grid);
      set.rois.push_back(std::move(entry));
    }
    try {
      set.validate();
    } catch (const ArgumentError& e) {
      throw ParseError(std::string("invalid segmentation: ") + e.what(), e.detail());
    }
    return set;
  } catch (const json::exception& e) {
    throw ParseError("malformed segmentation document", e.what());
  }
}

json report_to_json(const EvaluationReport& report) {
  json rois = json::array();
  for (const auto& e : report.rois) {
    rois.push_back({{"roi_name", e.roi_name},
                    {"dice", e.dice},
                    {"empty_pair", e.empty_pair},
                    {"pred_voxels", e.pred_voxels},
                    {"gt_voxels", e.gt_voxels},
                    {"intersection_voxels", e.intersection_voxels},
                    {"discrepancy_voxels", e.discrepancy_voxels},
                    {"matched", e.matched}});
  }
  return {{"series_id", report.series_id},
          {"pred_version", report.pred_version},
          {"gt_version", report.gt_version},
          {"rois", std::move(rois)},
          {"mean_dice", report.mean_dice ? json(*report.mean_dice) : json(nullptr)},
          {"matched_count", report.matched_count},
          {"unmatched_count", report.unmatched_count}};
}

EvaluationReport report_from_json(const json& doc) {
  try {
    EvaluationReport r;
    r.series_id = doc.at("series_id").get<std::string>();
    r.pred_version = doc.at("pred_version").get<std::int64_t>();
    r.gt_version = doc.at("gt_version").get<std::int64_t>();
    for (const auto& e : doc.at("rois")) {
      RoiEvaluation x;
      x.roi_name = e.at("roi_name").get<std::string>();
      x.dice = e.at("dice").get<double>();
      x.empty_pair = e.at("empty_pair").get<bool>();
      x.pred_voxels = e.at("pred_voxels").get<std::int64_t>();
      x.gt_voxels = e.at("gt_voxels").get<std::int64_t>();
      x.intersection_voxels = e.at("intersection_voxels").get<std::int64_t>();
      x.discrepancy_voxels = e.at("discrepancy_voxels").get<std::int64_t>();
      x.matched = e.at("matched").get<bool>();
      r.rois.push_back(std::move(x));
    }
    if (!doc.at("mean_dice").is_null()) r.mean_dice = doc["mean_dice"].get<double>();
    r.matched_count = doc.at("matched_count").get<std::int64_t>();
    r.unmatched_count = doc.at("unmatched_count").get<std::int64_t>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError("malformed evaluation report", e.what());
  }
}

}  // namespace segstudio
