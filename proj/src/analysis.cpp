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

#include "segstudio/analysis.hpp"

#include <bit>

namespace segstudio {

namespace {

void require_same_grid(const VoxelMask& a, const VoxelMask& b) {
  if (!(a.grid() == b.grid())) throw GridMismatchError("masks are on different grids");
}

}  // namespace

DiceResult dice(const VoxelMask& a, const VoxelMask& b) {
  require_same_grid(a, b);
  DiceResult r;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t n = 0; n < wa.size(); ++n) {
    r.a_voxels += std::popcount(wa[n]);
    r.b_voxels += std::popcount(wb[n]);
    r.intersection_voxels += std::popcount(wa[n] & wb[n]);
  }
  const std::int64_t denom = r.a_voxels + r.b_voxels;
  if (denom == 0) {
    r.score = 1.0;
    r.empty_pair = true;
  } else {
    r.score = 2.0 * static_cast<double>(r.intersection_voxels) / static_cast<double>(denom);
  }
  return r;
}

VoxelMask discrepancy_map(const VoxelMask& a, const VoxelMask& b) {
  require_same_grid(a, b);
  VoxelMask out(a.grid());
  auto dst = out.words();
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = wa[n] ^ wb[n];
  return out;
}

Evaluation evaluate(const SegmentationSet& pred, const SegmentationSet& gt) {
  if (pred.series_ref != gt.series_ref) {
    throw SeriesMismatchError("segmentations reference different series",
                              pred.series_ref + " vs " + gt.series_ref);
  }
  if (!(pred.grid == gt.grid)) throw GridMismatchError("segmentations are on different grids");

  Evaluation out;
  EvaluationReport& report = out.report;
  report.series_id = pred.series_ref;
  report.pred_version = pred.version;
  report.gt_version = gt.version;

  out.discrepancies.series_ref = pred.series_ref;
  out.discrepancies.grid = pred.grid;
  out.discrepancies.parent_version =
      pred.version > 0 ? std::optional<std::int64_t>(pred.version) : std::nullopt;
  out.discrepancies.provenance.source = ProvenanceSource::Derived;

  const VoxelMask empty(pred.grid);
  double dice_sum = 0;

  auto add = [&](const RoiMask& source, const VoxelMask& p, const VoxelMask& g, bool matched) {
    const DiceResult d = dice(p, g);
    RoiEvaluation e;
    e.roi_name = source.roi.name;
    e.dice = d.score;
    e.empty_pair = d.empty_pair;
    e.pred_voxels = d.a_voxels;
    e.gt_voxels = d.b_voxels;
    e.intersection_voxels = d.intersection_voxels;
    e.discrepancy_voxels = d.a_voxels + d.b_voxels - 2 * d.intersection_voxels;
    e.matched = matched;
    if (matched) {
      ++report.matched_count;
      dice_sum += d.score;
    } else {
      ++report.unmatched_count;
    }
    report.rois.push_back(std::move(e));

    Roi roi = source.roi;
    roi.number = static_cast<int>(out.discrepancies.rois.size()) + 1;
    roi.name = source.roi.name + "-discrepancy";
    out.discrepancies.rois.push_back({std::move(roi), discrepancy_map(p, g)});
  };

  for (const auto& p : pred.rois) {
    const RoiMask* g = gt.find(p.roi.name);
    add(p, p.mask, g ? g->mask : empty, g != nullptr);
  }
  for (const auto& g : gt.rois) {
    if (pred.find(g.roi.name) == nullptr) add(g, empty, g.mask, false);
  }
  if (report.matched_count > 0) {
    report.mean_dice = dice_sum / static_cast<double>(report.matched_count);
  }
  return out;
}

}  // namespace segstudio
