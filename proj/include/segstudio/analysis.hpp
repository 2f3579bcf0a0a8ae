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

#include "segstudio/mask.hpp"

namespace segstudio {

struct DiceResult {
  double score = 0;
  bool empty_pair = false;  // both masks empty; score is 1 by convention
  std::int64_t a_voxels = 0;
  std::int64_t b_voxels = 0;
  std::int64_t intersection_voxels = 0;
};

/// 2|A n B| / (|A| + |B|) over word-level popcounts. Two empty masks score
/// 1.0 with `empty_pair` set. Throws GridMismatchError unless the grids are
/// identical.
DiceResult dice(const VoxelMask& a, const VoxelMask& b);

/// Symmetric difference of two masks on the same grid.
VoxelMask discrepancy_map(const VoxelMask& a, const VoxelMask& b);

struct RoiEvaluation {
  std::string roi_name;
  double dice = 0;
  bool empty_pair = false;
  std::int64_t pred_voxels = 0;
  std::int64_t gt_voxels = 0;
  std::int64_t intersection_voxels = 0;
  std::int64_t discrepancy_voxels = 0;
  bool matched = false;
};

struct EvaluationReport {
  std::string series_id;
  std::int64_t pred_version = 0;
  std::int64_t gt_version = 0;
  std::vector<RoiEvaluation> rois;
  std::optional<double> mean_dice;  // over matched ROIs; empty when none matched
  std::int64_t matched_count = 0;
  std::int64_t unmatched_count = 0;
};

struct Evaluation {
  EvaluationReport report;
  SegmentationSet discrepancies;  // one "<roi>-discrepancy" mask per report entry
};

/// Matches ROIs by exact, case-sensitive name. Predicted ROIs come first in
/// their own order, then ground-truth ROIs with no prediction. An unmatched
/// ROI is scored against an empty mask. Throws SeriesMismatchError when the
/// sets reference different series and GridMismatchError when their grids
/// differ.
Evaluation evaluate(const SegmentationSet& pred, const SegmentationSet& gt);

}  // namespace segstudio
