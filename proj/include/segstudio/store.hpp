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

/*
 * Durable versioned storage.
 *
 * Layout under the data directory:
 *
 *   blobs/<sha256>     content-addressed payloads, each starting with the
 *                      "SEGBLOB1" magic line
 *   index.log          "SEGSTUDIO-INDEX 1" header, then one committed record
 *                      per line: "<16 hex checksum> <json>"
 *   workspaces/<id>/   executor staging areas; a ".series" file names the
 *                      series staged there so purge can find the copies
 *
 * A write lands its blob first (temp file, fsync, rename) and then appends
 * one index record; the fsync of that record is the commit point. On open
 * the log is replayed, a torn final record is discarded, the log is
 * compacted and unreferenced blobs are swept.
 */

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segstudio/analysis.hpp"
#include "segstudio/dicom.hpp"
#include "segstudio/mask.hpp"

namespace segstudio {

struct StoreOptions {
  std::filesystem::path data_dir;
  /// Test hook invoked at "blob-written", "index-partial" and "committed".
  /// A hook that terminates the process simulates a crash at that point.
  std::function<void(std::string_view)> crash_hook;
};

struct SeriesSummary {
  std::string series_id;
  std::string study_id;
  std::string modality;
  std::string patient_pseudonym;
  Grid grid;
  std::string blob;
  std::int64_t segmentation_count = 0;
};

struct StudyListing {
  std::string study_id;
  std::vector<SeriesSummary> series;
};

struct VersionEntry {
  std::int64_t version = 0;
  std::optional<std::int64_t> parent_version;
  Provenance provenance;
  std::string blob;
};

struct ReportEntry {
  std::string report_id;
  std::int64_t pred_version = 0;
  std::int64_t gt_version = 0;
  std::optional<std::int64_t> discrepancy_version;
  std::string blob;
};

enum class PurgeScope { ComputeCopies, Everything };

struct PurgeReceipt {
  std::string series_id;
  PurgeScope scope = PurgeScope::ComputeCopies;
  std::vector<std::string> removed_blobs;            // index references dropped
  std::vector<std::string> removed_workspace_files;  // staged compute copies
};

struct IntegrityReport {
  bool ok = true;
  std::vector<std::string> problems;
};

class Store {
 public:
  explicit Store(StoreOptions options);
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  [[nodiscard]] const std::filesystem::path& data_dir() const noexcept { return options_.data_dir; }
  [[nodiscard]] std::filesystem::path workspace_root() const { return options_.data_dir / "workspaces"; }

  // Series ------------------------------------------------------------------

  /// Idempotent for identical content; a different volume under an existing
  /// series id raises ConflictError.
  std::string put_series(const ImageSeries& series);
  [[nodiscard]] ImageSeries get_series(const std::string& series_id) const;
  [[nodiscard]] SeriesSummary series_info(const std::string& series_id) const;
  [[nodiscard]] std::vector<StudyListing> list_studies() const;

  // Segmentations -----------------------------------------------------------

  /// Appends a new version (previous max + 1). The set's grid must equal the
  /// series grid; a given parent_version must exist.
  std::int64_t put_segmentation(const std::string& series_id, const SegmentationSet& set);
  [[nodiscard]] SegmentationSet get_segmentation(const std::string& series_id,
                                                 std::int64_t version) const;
  [[nodiscard]] std::vector<VersionEntry> list_versions(const std::string& series_id) const;
  [[nodiscard]] std::int64_t latest_version(const std::string& series_id) const;

  // Reports -----------------------------------------------------------------

  std::string put_report(const EvaluationReport& report,
                         std::optional<std::int64_t> discrepancy_version);
  [[nodiscard]] EvaluationReport get_report(const std::string& series_id,
                                            const std::string& report_id) const;
  [[nodiscard]] std::vector<ReportEntry> list_reports(const std::string& series_id) const;

  // Purge -------------------------------------------------------------------

  PurgeReceipt purge_series(const std::string& series_id, PurgeScope scope);

  // Orchestrator records (latest record per id wins) -------------------------

  void put_model_record(const std::string& model_id, const nlohmann::json& record);
  [[nodiscard]] std::vector<nlohmann::json> model_records() const;
  void put_job_record(const std::string& job_id, const nlohmann::json& record);
  [[nodiscard]] std::vector<nlohmann::json> job_records() const;

  // Maintenance -------------------------------------------------------------

  /// Re-hashes every referenced blob and checks version lineage.
  [[nodiscard]] IntegrityReport verify() const;

  /// Deletes blobs and temp files no index entry references. Returns the
  /// number of files removed.
  std::size_t sweep();

 private:
  struct SeriesState {
    SeriesSummary summary;
    std::vector<VersionEntry> versions;
    std::vector<ReportEntry> reports;
  };

  struct Index {
    std::map<std::string, SeriesState> series;
    std::map<std::string, std::int64_t> version_floor;  // survives purge
    std::map<std::string, nlohmann::json> models;
    std::map<std::string, nlohmann::json> jobs;
    std::int64_t report_counter = 0;
  };

  void open();
  void apply(Index& index, const nlohmann::json& record) const;
  void commit(const nlohmann::json& record);
  void rewrite_log();
  std::string write_blob(std::string_view kind, std::string_view payload);
  std::string read_blob(const std::string& checksum, std::string_view kind) const;
  std::vector<std::string> referenced_blobs_locked() const;
  const SeriesState& series_locked(const std::string& series_id) const;
  std::vector<std::string> purge_workspaces(const std::string& series_id);
  void hook(std::string_view point) const;

  StoreOptions options_;
  // Lock order: blob_mutex_ before index_mutex_. Log appends happen under
  // the exclusive index lock.
  mutable std::shared_mutex index_mutex_;
  std::shared_mutex blob_mutex_;  // puts shared, physical deletes exclusive
  Index index_;
  int log_fd_ = -1;
};

std::string_view to_string(PurgeScope scope) noexcept;

}  // namespace segstudio
