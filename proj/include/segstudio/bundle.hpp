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

#include <nlohmann/json.hpp>

#include "segstudio/store.hpp"
#include "segstudio/util.hpp"

namespace segstudio {

struct TarEntry {
  std::string name;
  Bytes data;
};

/// POSIX ustar archive of regular files, mode 0644, terminated by two zero
/// blocks. Names longer than 100 bytes use the prefix field.
Bytes write_tar(const std::vector<TarEntry>& entries, std::int64_t mtime_s);
std::vector<TarEntry> read_tar(std::span<const std::uint8_t> archive);

inline constexpr std::string_view kBundleFormat = "segstudio.al-bundle";

struct ExportRequest {
  std::string series_id;
  std::int64_t pred_version = 0;
  std::int64_t corrected_version = 0;
  std::optional<std::int64_t> gt_version;
  bool include_images = false;
};

struct ExportBundle {
  Bytes archive;
  nlohmann::json manifest;
};

/// Builds the active-learning archive:
///
///   manifest.json              series reference, version lineage and
///                              provenance, dice_before / dice_after, file
///                              checksums
///   masks/pred-v<N>.json       segmentation exchange documents
///   masks/corrected-v<N>.json
///   masks/gt-v<N>.json         only with a gt version
///   images/volume.bin          only with include_images
///   images/series.meta
///
/// DICE is measured against the gt version when given, otherwise against
/// the corrected version. Unknown versions raise NotFoundError.
ExportBundle export_bundle(const Store& store, const ExportRequest& request);

}  // namespace segstudio
