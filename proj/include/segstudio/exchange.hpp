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

// JSON documents exchanged over HTTP and written into bundles. Field layout
// is documented in docs/formats.md and must stay stable.

#pragma once

#include <nlohmann/json.hpp>

#include "segstudio/analysis.hpp"
#include "segstudio/geometry.hpp"
#include "segstudio/mask.hpp"

namespace segstudio {

inline constexpr std::string_view kSegmentationFormat = "segstudio.segmentation";
inline constexpr int kSegmentationFormatVersion = 1;

nlohmann::json grid_to_json(const Grid& grid);
Grid grid_from_json(const nlohmann::json& doc);

nlohmann::json provenance_to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& doc);

/// Segmentation exchange document: header fields plus one entry per ROI with
/// its mask as canonical RLE runs.
nlohmann::json segmentation_to_json(const SegmentationSet& set);

/// Throws ParseError on malformed documents and CodecError on RLE that does
/// not fit the echoed grid.
SegmentationSet segmentation_from_json(const nlohmann::json& doc);

nlohmann::json report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& doc);

}  // namespace segstudio
