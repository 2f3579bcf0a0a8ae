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

#include "segstudio/store.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include <fcntl.h>
#include <unistd.h>

#include "segstudio/exchange.hpp"
#include "segstudio/util.hpp"

namespace segstudio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kLogHeader = "SEGSTUDIO-INDEX 1\n";
constexpr std::string_view kBlobMagic = "SEGBLOB1\n";
constexpr std::size_t kRecordSumLen = 16;

std::string record_line(const json& record) {
  const std::string body = record.dump();
  return sha256_hex(body).substr(0, kRecordSumLen) + " " + body + "\n";
}

/// Parses one log line without its newline. Returns nullopt when the line is
/// damaged.
std::optional<json> parse_record_line(std::string_view line) {
  if (line.size() < kRecordSumLen + 2 || line[kRecordSumLen] != ' ') return std::nullopt;
  const std::string_view body = line.substr(kRecordSumLen + 1);
  if (sha256_hex(body).substr(0, kRecordSumLen) != line.substr(0, kRecordSumLen)) {
    return std::nullopt;
  }
  try {
    return json::parse(body);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Internal, "index append failed", std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

bool is_blob_name(const std::string& name) {
  return name.size() == 64 &&
         std::all_of(name.begin(), name.end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::string series_payload(const ImageSeries& s) {
  const json header = {{"study_id", s.study_id},
                       {"series_id", s.series_id},
                       {"modality", s.modality},
                       {"patient_pseudonym", s.patient_pseudonym},
                       {"grid", grid_to_json(s.grid)}};
  std::string out = header.dump();
  out += '\n';
  const std::size_t base = out.size();
  out.resize(base + s.voxels.size() * 2);
  for (std::size_t n = 0; n < s.voxels.size(); ++n) {
    const auto v = static_cast<std::uint16_t>(s.voxels[n]);
    out[base + 2 * n] = static_cast<char>(v & 0xff);
    out[base + 2 * n + 1] = static_cast<char>(v >> 8);
  }
  return out;
}

ImageSeries series_from_payload(std::string_view payload) {
  const auto nl = payload.find('\n');
  if (nl == std::string_view::npos) throw IntegrityError("series blob has no header");
  const json header = json::parse(payload.substr(0, nl));
  ImageSeries s;
  s.study_id = header.at("study_id").get<std::string>();
  s.series_id = header.at("series_id").get<std::string>();
  s.modality = header.at("modality").get<std::string>();
  s.patient_pseudonym = header.at("patient_pseudonym").get<std::string>();
  s.grid = grid_from_json(header.at("grid"));
  const std::string_view raw = payload.substr(nl + 1);
  if (raw.size() != static_cast<std::size_t>(s.grid.voxel_count()) * 2) {
    throw IntegrityError("series blob voxel payload has the wrong length");
  }
  s.voxels.resize(raw.size() / 2);
  for (std::size_t n = 0; n < s.voxels.size(); ++n) {
    const auto lo = static_cast<std::uint8_t>(raw[2 * n]);
    const auto hi = static_cast<std::uint8_t>(raw[2 * n + 1]);
    s.voxels[n] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
  }
  return s;
}

json version_record(const std::string& series_id, const VersionEntry& v) {
  return {{"op", "segmentation"},
          {"series_id", series_id},
          {"version", v.version},
          {"parent_version", v.parent_version ? json(*v.parent_version) : json(nullptr)},
          {"provenance", provenance_to_json(v.provenance)},
          {"blob", v.blob}};
}

json report_record(const std::string& series_id, const ReportEntry& r) {
  return {{"op", "report"},
          {"series_id", series_id},
          {"report_id", r.report_id},
          {"pred_version", r.pred_version},
          {"gt_version", r.gt_version},
          {"discrepancy_version",
           r.discrepancy_version ? json(*r.discrepancy_version) : json(nullptr)},
          {"blob", r.blob}};
}

json series_record(const SeriesSummary& s) {
  return {{"op", "series"},
          {"series_id", s.series_id},
          {"study_id", s.study_id},
          {"modality", s.modality},
          {"patient_pseudonym", s.patient_pseudonym},
          {"grid", grid_to_json(s.grid)},
          {"blob", s.blob}};
}

}  // namespace

std::string_view to_string(PurgeScope scope) noexcept {
  return scope == PurgeScope::Everything ? "everything" : "compute-copies";
}

Store::Store(StoreOptions options) : options_(std::move(options)) {
  if (options_.data_dir.empty()) throw ArgumentError("data directory must be set");
  open();
}

Store::~Store() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

void Store::hook(std::string_view point) const {
  if (options_.crash_hook) options_.crash_hook(point);
}

void Store::open() {
  std::error_code ec;
  fs::create_directories(options_.data_dir / "blobs", ec);
  fs::create_directories(workspace_root(), ec);
  if (ec) throw StartupError("cannot create data directory", ec.message());

  const fs::path log_path = options_.data_dir / "index.log";
  if (!fs::exists(log_path)) write_file_atomic(log_path, kLogHeader);

  const Bytes raw = read_file(log_path);
  const std::string_view text(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!text.starts_with(kLogHeader)) {
    throw IntegrityError("index log header is missing or unrecognised", log_path.string());
  }

  Index index;
  std::size_t pos = kLogHeader.size();
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) break;  // torn tail, dropped by compaction
    auto record = parse_record_line(text.substr(pos, nl - pos));
    if (!record) {
      if (nl + 1 == text.size()) break;
      throw IntegrityError("index log record is corrupt",
                           "byte offset " + std::to_string(pos));
    }
    apply(index, *record);
    pos = nl + 1;
  }
  index_ = std::move(index);
  rewrite_log();
  log_fd_ = ::open(log_path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (log_fd_ < 0) throw StartupError("cannot open index log", std::strerror(errno));
  sweep();
}

void Store::apply(Index& index, const json& r) const {
  try {
    const std::string op = r.at("op").get<std::string>();
    if (op == "series") {
      SeriesState& s = index.series[r.at("series_id").get<std::string>()];
      s.summary.series_id = r.at("series_id").get<std::string>();
      s.summary.study_id = r.at("study_id").get<std::string>();
      s.summary.modality = r.at("modality").get<std::string>();
      s.summary.patient_pseudonym = r.at("patient_pseudonym").get<std::string>();
      s.summary.grid = grid_from_json(r.at("grid"));
      s.summary.blob = r.at("blob").get<std::string>();
    } else if (op == "segmentation") {
      const std::string id = r.at("series_id").get<std::string>();
      auto it = index.series.find(id);
      if (it == index.series.end()) throw IntegrityError("segmentation record for unknown series", id);
      VersionEntry v;
      v.version = r.at("version").get<std::int64_t>();
      if (!r.at("parent_version").is_null()) v.parent_version = r["parent_version"].get<std::int64_t>();
      v.provenance = provenance_from_json(r.at("provenance"));
      v.blob = r.at("blob").get<std::string>();
      auto& floor = index.version_floor[id];
      if (v.version <= floor) throw IntegrityError("segmentation version is not increasing", id);
      floor = v.version;
      it->second.versions.push_back(std::move(v));
      it->second.summary.segmentation_count = static_cast<std::int64_t>(it->second.versions.size());
    } else if (op == "report") {
      const std::string id = r.at("series_id").get<std::string>();
      auto it = index.series.find(id);
      if (it == index.series.end()) throw IntegrityError("report record for unknown series", id);
      ReportEntry e;
      e.report_id = r.at("report_id").get<std::string>();
      e.pred_version = r.at("pred_version").get<std::int64_t>();
      e.gt_version = r.at("gt_version").get<std::int64_t>();
      if (!r.at("discrepancy_version").is_null()) {
        e.discrepancy_version = r["discrepancy_version"].get<std::int64_t>();
      }
      e.blob = r.at("blob").get<std::string>();
      it->second.reports.push_back(std::move(e));
      ++index.report_counter;
    } else if (op == "purge") {
      index.series.erase(r.at("series_id").get<std::string>());
    } else if (op == "floor") {
      index.version_floor[r.at("series_id").get<std::string>()] = r.at("version").get<std::int64_t>();
    } else if (op == "counter") {
      index.report_counter = r.at("reports").get<std::int64_t>();
    } else if (op == "model") {
      index.models[r.at("id").get<std::string>()] = r.at("record");
    } else if (op == "job") {
      index.jobs[r.at("id").get<std::string>()] = r.at("record");
    } else {
      throw IntegrityError("unknown index record", op);
    }
  } catch (const json::exception& e) {
    throw IntegrityError("malformed index record", e.what());
  } catch (const ParseError& e) {
    throw IntegrityError("malformed index record", e.detail());
  }
}

void Store::rewrite_log() {
  std::string out(kLogHeader);
  for (const auto& [id, s] : index_.series) out += record_line(series_record(s.summary));
  for (const auto& [id, s] : index_.series) {
    for (const auto& v : s.versions) out += record_line(version_record(id, v));
    for (const auto& r : s.reports) out += record_line(report_record(id, r));
  }
  // Floors and the report counter go last so they override replayed values
  // and keep numbers of purged data from being reused.
  for (const auto& [id, floor] : index_.version_floor) {
    out += record_line({{"op", "floor"}, {"series_id", id}, {"version", floor}});
  }
  out += record_line({{"op", "counter"}, {"reports", index_.report_counter}});
  for (const auto& [id, rec] : index_.models) {
    out += record_line({{"op", "model"}, {"id", id}, {"record", rec}});
  }
  for (const auto& [id, rec] : index_.jobs) {
    out += record_line({{"op", "job"}, {"id", id}, {"record", rec}});
  }
  write_file_atomic(options_.data_dir / "index.log", out);
}

void Store::commit(const json& record) {
  const std::string line = record_line(record);
  if (options_.crash_hook) {
    // Split so a crash hook can observe a half-written record on disk.
    const std::size_t half = line.size() / 2;
    write_all(log_fd_, std::string_view(line).substr(0, half));
    ::fsync(log_fd_);
    hook("index-partial");
    write_all(log_fd_, std::string_view(line).substr(half));
  } else {
    write_all(log_fd_, line);
  }
  if (::fsync(log_fd_) != 0) throw Error(ErrorCode::Internal, "index fsync failed", std::strerror(errno));
}

std::string Store::write_blob(std::string_view kind, std::string_view payload) {
  std::string content(kBlobMagic);
  content += kind;
  content += '\n';
  content += payload;
  const std::string sum = sha256_hex(content);
  const fs::path path = options_.data_dir / "blobs" / sum;
  if (!fs::exists(path)) write_file_atomic(path, content);
  return sum;
}

std::string Store::read_blob(const std::string& checksum, std::string_view kind) const {
  const fs::path path = options_.data_dir / "blobs" / checksum;
  Bytes raw;
  try {
    raw = read_file(path);
  } catch (const NotFoundError&) {
    throw IntegrityError("referenced blob is missing", checksum);
  }
  if (sha256_hex(raw) != checksum) throw IntegrityError("blob checksum mismatch", checksum);
  std::string_view text(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!text.starts_with(kBlobMagic)) throw IntegrityError("blob magic missing", checksum);
  text.remove_prefix(kBlobMagic.size());
  const auto nl = text.find('\n');
  if (nl == std::string_view::npos || text.substr(0, nl) != kind) {
    throw IntegrityError("blob kind mismatch", checksum);
  }
  return std::string(text.substr(nl + 1));
}

const Store::SeriesState& Store::series_locked(const std::string& series_id) const {
  auto it = index_.series.find(series_id);
  if (it == index_.series.end()) throw NotFoundError("series not found", series_id);
  return it->second;
}

// Series ---------------------------------------------------------------------

std::string Store::put_series(const ImageSeries& series) {
  series.validate();
  if (series.series_id.empty()) throw ArgumentError("series id must not be empty");
  const std::string payload = series_payload(series);

  std::shared_lock blobs(blob_mutex_);
  const std::string blob = write_blob("series", payload);
  hook("blob-written");
  std::unique_lock lock(index_mutex_);
  if (auto it = index_.series.find(series.series_id); it != index_.series.end()) {
    if (it->second.summary.blob == blob) return series.series_id;
    throw ConflictError("series already stored with different content", series.series_id);
  }
  SeriesSummary s;
  s.series_id = series.series_id;
  s.study_id = series.study_id;
  s.modality = series.modality;
  s.patient_pseudonym = series.patient_pseudonym;
  s.grid = series.grid;
  s.blob = blob;
  const json record = series_record(s);
  commit(record);
  apply(index_, record);
  hook("committed");
  return series.series_id;
}

ImageSeries Store::get_series(const std::string& series_id) const {
  std::string blob;
  {
    std::shared_lock lock(index_mutex_);
    blob = series_locked(series_id).summary.blob;
  }
  return series_from_payload(read_blob(blob, "series"));
}

SeriesSummary Store::series_info(const std::string& series_id) const {
  std::shared_lock lock(index_mutex_);
  return series_locked(series_id).summary;
}

std::vector<StudyListing> Store::list_studies() const {
  std::shared_lock lock(index_mutex_);
  std::map<std::string, StudyListing> studies;
  for (const auto& [id, s] : index_.series) {
    auto& study = studies[s.summary.study_id];
    study.study_id = s.summary.study_id;
    study.series.push_back(s.summary);
  }
  std::vector<StudyListing> out;
  for (auto& [id, study] : studies) out.push_back(std::move(study));
  return out;
}

// Segmentations --------------------------------------------------------------

std::int64_t Store::put_segmentation(const std::string& series_id, const SegmentationSet& set) {
  set.validate();
  if (!set.series_ref.empty() && set.series_ref != series_id) {
    throw SeriesMismatchError("segmentation references a different series",
                              set.series_ref + " != " + series_id);
  }
  // The blob holds masks only; version, lineage and provenance live in the
  // index so identical mask content is stored once.
  SegmentationSet body = set;
  body.series_ref = series_id;
  body.version = 0;
  body.parent_version.reset();
  body.provenance = {};
  const std::string payload = segmentation_to_json(body).dump();

  std::shared_lock blobs(blob_mutex_);
  const std::string blob = write_blob("segmentation", payload);
  hook("blob-written");

  std::unique_lock lock(index_mutex_);
  const SeriesState& s = series_locked(series_id);
  if (!(s.summary.grid == set.grid)) {
    throw GridMismatchError("segmentation grid differs from the series grid", series_id);
  }
  if (set.parent_version) {
    const bool known = std::any_of(s.versions.begin(), s.versions.end(),
                                   [&](const VersionEntry& v) { return v.version == *set.parent_version; });
    if (!known) {
      throw NotFoundError("parent version does not exist", std::to_string(*set.parent_version));
    }
  }
  VersionEntry entry;
  entry.version = index_.version_floor[series_id] + 1;
  entry.parent_version = set.parent_version;
  entry.provenance = set.provenance;
  if (entry.provenance.created_at_us == 0) entry.provenance.created_at_us = now_us();
  entry.blob = blob;
  const json record = version_record(series_id, entry);
  commit(record);
  apply(index_, record);
  hook("committed");
  return entry.version;
}

SegmentationSet Store::get_segmentation(const std::string& series_id, std::int64_t version) const {
  VersionEntry entry;
  {
    std::shared_lock lock(index_mutex_);
    const SeriesState& s = series_locked(series_id);
    auto it = std::find_if(s.versions.begin(), s.versions.end(),
                           [&](const VersionEntry& v) { return v.version == version; });
    if (it == s.versions.end()) {
      throw NotFoundError("segmentation version not found",
                          series_id + " v" + std::to_string(version));
    }
    entry = *it;
  }
  SegmentationSet set;
  try {
    set = segmentation_from_json(json::parse(read_blob(entry.blob, "segmentation")));
  } catch (const json::exception& e) {
    throw IntegrityError("segmentation blob is not valid JSON", e.what());
  }
  set.version = entry.version;
  set.parent_version = entry.parent_version;
  set.provenance = entry.provenance;
  return set;
}

std::vector<VersionEntry> Store::list_versions(const std::string& series_id) const {
  std::shared_lock lock(index_mutex_);
  return series_locked(series_id).versions;
}

std::int64_t Store::latest_version(const std::string& series_id) const {
  std::shared_lock lock(index_mutex_);
  const auto& v = series_locked(series_id).versions;
  return v.empty() ? 0 : v.back().version;
}

// Reports --------------------------------------------------------------------

std::string Store::put_report(const EvaluationReport& report,
                              std::optional<std::int64_t> discrepancy_version) {
  const std::string payload = report_to_json(report).dump();
  std::shared_lock blobs(blob_mutex_);
  const std::string blob = write_blob("report", payload);
  hook("blob-written");

  std::unique_lock lock(index_mutex_);
  const SeriesState& s = series_locked(report.series_id);
  auto has = [&](std::int64_t v) {
    return std::any_of(s.versions.begin(), s.versions.end(),
                       [&](const VersionEntry& e) { return e.version == v; });
  };
  if (!has(report.pred_version) || !has(report.gt_version)) {
    throw NotFoundError("report references an unknown version", report.series_id);
  }
  ReportEntry e;
  e.report_id = "report-" + std::to_string(index_.report_counter + 1);
  e.pred_version = report.pred_version;
  e.gt_version = report.gt_version;
  e.discrepancy_version = discrepancy_version;
  e.blob = blob;
  const json record = report_record(report.series_id, e);
  commit(record);
  apply(index_, record);
  hook("committed");
  return e.report_id;
}

EvaluationReport Store::get_report(const std::string& series_id,
                                   const std::string& report_id) const {
  std::string blob;
  {
    std::shared_lock lock(index_mutex_);
    const auto& reports = series_locked(series_id).reports;
    auto it = std::find_if(reports.begin(), reports.end(),
                           [&](const ReportEntry& r) { return r.report_id == report_id; });
    if (it == reports.end()) throw NotFoundError("report not found", report_id);
    blob = it->blob;
  }
  try {
    return report_from_json(json::parse(read_blob(blob, "report")));
  } catch (const json::exception& e) {
    throw IntegrityError("report blob is not valid JSON", e.what());
  }
}

std::vector<ReportEntry> Store::list_reports(const std::string& series_id) const {
  std::shared_lock lock(index_mutex_);
  return series_locked(series_id).reports;
}

// Purge ----------------------------------------------------------------------

std::vector<std::string> Store::purge_workspaces(const std::string& series_id) {
  std::vector<std::string> removed;
  std::error_code ec;
  for (const auto& dir : fs::directory_iterator(workspace_root(), ec)) {
    if (!dir.is_directory()) continue;
    const fs::path marker = dir.path() / ".series";
    if (!fs::exists(marker)) continue;
    const Bytes content = read_file(marker);
    if (std::string(content.begin(), content.end()) != series_id) continue;
    for (const auto& f : fs::recursive_directory_iterator(dir.path())) {
      if (f.is_regular_file()) removed.push_back(fs::relative(f.path(), workspace_root()).string());
    }
    // The directory belongs to its executor and stays; only the contents go.
    for (const auto& child : fs::directory_iterator(dir.path())) fs::remove_all(child.path());
  }
  std::sort(removed.begin(), removed.end());
  return removed;
}

PurgeReceipt Store::purge_series(const std::string& series_id, PurgeScope scope) {
  PurgeReceipt receipt;
  receipt.series_id = series_id;
  receipt.scope = scope;

  std::unique_lock blobs(blob_mutex_);
  std::set<std::string> dropped;
  {
    std::unique_lock lock(index_mutex_);
    const SeriesState& s = series_locked(series_id);
    if (scope == PurgeScope::Everything) {
      dropped.insert(s.summary.blob);
      for (const auto& v : s.versions) dropped.insert(v.blob);
      for (const auto& r : s.reports) dropped.insert(r.blob);
      // Logical removal first; physical deletion follows.
      const json record = {{"op", "purge"}, {"series_id", series_id}};
      commit(record);
      apply(index_, record);
      hook("committed");
    }
  }
  receipt.removed_workspace_files = purge_workspaces(series_id);
  if (scope == PurgeScope::Everything) {
    receipt.removed_blobs.assign(dropped.begin(), dropped.end());
    std::set<std::string> live;
    {
      std::shared_lock lock(index_mutex_);
      for (auto& b : referenced_blobs_locked()) live.insert(std::move(b));
    }
    for (const auto& b : dropped) {
      if (!live.count(b)) fs::remove(options_.data_dir / "blobs" / b);
    }
  }
  return receipt;
}

// Orchestrator records -------------------------------------------------------

void Store::put_model_record(const std::string& model_id, const json& record) {
  std::unique_lock lock(index_mutex_);
  const json r = {{"op", "model"}, {"id", model_id}, {"record", record}};
  commit(r);
  apply(index_, r);
}

std::vector<json> Store::model_records() const {
  std::shared_lock lock(index_mutex_);
  std::vector<json> out;
  for (const auto& [id, r] : index_.models) out.push_back(r);
  return out;
}

void Store::put_job_record(const std::string& job_id, const json& record) {
  std::unique_lock lock(index_mutex_);
  const json r = {{"op", "job"}, {"id", job_id}, {"record", record}};
  commit(r);
  apply(index_, r);
}

std::vector<json> Store::job_records() const {
  std::shared_lock lock(index_mutex_);
  std::vector<json> out;
  for (const auto& [id, r] : index_.jobs) out.push_back(r);
  return out;
}

// Maintenance ----------------------------------------------------------------

std::vector<std::string> Store::referenced_blobs_locked() const {
  std::vector<std::string> out;
  for (const auto& [id, s] : index_.series) {
    out.push_back(s.summary.blob);
    for (const auto& v : s.versions) out.push_back(v.blob);
    for (const auto& r : s.reports) out.push_back(r.blob);
  }
  return out;
}

IntegrityReport Store::verify() const {
  IntegrityReport report;
  auto problem = [&](std::string text) {
    report.ok = false;
    report.problems.push_back(std::move(text));
  };
  std::shared_lock lock(index_mutex_);
  for (const auto& [id, s] : index_.series) {
    std::vector<std::pair<std::string, std::string_view>> blobs{{s.summary.blob, "series"}};
    for (const auto& v : s.versions) blobs.emplace_back(v.blob, "segmentation");
    for (const auto& r : s.reports) blobs.emplace_back(r.blob, "report");
    for (const auto& [blob, kind] : blobs) {
      try {
        (void)read_blob(blob, kind);
      } catch (const Error& e) {
        problem(id + ": " + e.what() + " (" + e.detail() + ")");
      }
    }
    std::set<std::int64_t> seen;
    std::int64_t last = 0;
    for (const auto& v : s.versions) {
      if (v.version <= last) problem(id + ": version " + std::to_string(v.version) + " out of order");
      if (v.parent_version && !seen.count(*v.parent_version)) {
        problem(id + ": version " + std::to_string(v.version) + " has unknown parent");
      }
      seen.insert(v.version);
      last = v.version;
    }
    for (const auto& r : s.reports) {
      if (!seen.count(r.pred_version) || !seen.count(r.gt_version)) {
        problem(id + ": " + r.report_id + " references an unknown version");
      }
    }
  }
  return report;
}

std::size_t Store::sweep() {
  std::unique_lock blobs(blob_mutex_);
  std::set<std::string> live;
  {
    std::shared_lock lock(index_mutex_);
    for (auto& b : referenced_blobs_locked()) live.insert(std::move(b));
  }
  std::size_t removed = 0;
  std::error_code ec;
  for (const auto& f : fs::directory_iterator(options_.data_dir / "blobs", ec)) {
    const std::string name = f.path().filename().string();
    if (!is_blob_name(name) || !live.count(name)) {
      fs::remove(f.path(), ec);
      ++removed;
    }
  }
  for (const auto& f : fs::directory_iterator(options_.data_dir, ec)) {
    if (f.path().filename().string().starts_with("index.log.tmp-")) {
      fs::remove(f.path(), ec);
      ++removed;
    }
  }
  return removed;
}

}  // namespace segstudio
