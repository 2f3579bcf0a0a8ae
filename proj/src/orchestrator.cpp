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

#include "segstudio/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <tuple>

#include "segstudio/exchange.hpp"
#include "segstudio/util.hpp"

namespace segstudio {

namespace fs = std::filesystem;
using nlohmann::json;

// Manifests ------------------------------------------------------------------

json manifest_to_json(const ModelManifest& m) {
  return {{"model_id", m.model_id},
          {"name", m.name},
          {"version", m.version},
          {"image", m.image},
          {"label_map", m.label_map},
          {"modality", m.modality},
          {"resources", m.resources},
          {"params", m.params},
          {"registered_at_us", m.registered_at_us}};
}

ModelManifest manifest_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw ParseError("model manifest must be a JSON object");
    ModelManifest m;
    m.model_id = doc.value("model_id", std::string{});
    m.name = doc.at("name").get<std::string>();
    m.version = doc.at("version").get<std::string>();
    m.image = doc.value("image", std::string(kBuiltinThresholdImage));
    m.label_map = doc.at("label_map").get<std::map<std::string, int>>();
    m.modality = doc.value("modality", std::string{});
    m.resources = doc.value("resources", json::object());
    m.params = doc.value("params", json::object());
    m.registered_at_us = doc.value("registered_at_us", std::int64_t{0});
    return m;
  } catch (const json::exception& e) {
    throw ParseError("malformed model manifest", e.what());
  }
}

ModelRegistry::ModelRegistry(Store& store) : store_(store) {
  for (const auto& r : store_.model_records()) {
    ModelManifest m = manifest_from_json(r);
    models_.emplace(m.model_id, std::move(m));
  }
}

ModelManifest ModelRegistry::register_model(ModelManifest m) {
  if (m.name.empty()) throw ArgumentError("model name must not be empty");
  if (m.version.empty()) throw ArgumentError("model version must not be empty");
  if (m.image.empty()) throw ArgumentError("model image must not be empty");
  if (m.label_map.empty()) throw ArgumentError("model label map must not be empty");
  std::set<int> labels;
  for (const auto& [roi, label] : m.label_map) {
    if (roi.empty()) throw ArgumentError("label map has an empty ROI name");
    if (label < 1 || label > 65535) {
      throw ArgumentError("labels must be in 1..65535", roi + "=" + std::to_string(label));
    }
    if (!labels.insert(label).second) {
      throw ArgumentError("label map assigns one label twice", std::to_string(label));
    }
  }
  if (m.image == kBuiltinThresholdImage) {
    const bool single = m.label_map.size() == 1 && m.params.contains("threshold");
    const bool windows = m.params.contains("windows") && m.params["windows"].is_object();
    if (!single && !windows) {
      throw ArgumentError("threshold model needs params.threshold (one label) or params.windows");
    }
  }

  std::lock_guard lock(mutex_);
  for (const auto& [id, existing] : models_) {
    if (existing.name == m.name && existing.version == m.version) {
      throw ConflictError("model already registered", m.name + " " + m.version);
    }
  }
  char id[32];
  std::snprintf(id, sizeof id, "model-%04zu", models_.size() + 1);
  m.model_id = id;
  m.registered_at_us = now_us();
  store_.put_model_record(m.model_id, manifest_to_json(m));
  models_.emplace(m.model_id, m);
  return m;
}

std::vector<ModelManifest> ModelRegistry::list() const {
  std::lock_guard lock(mutex_);
  std::vector<ModelManifest> out;
  for (const auto& [id, m] : models_) out.push_back(m);
  std::sort(out.begin(), out.end(), [](const ModelManifest& a, const ModelManifest& b) {
    return std::tie(a.name, a.version) < std::tie(b.name, b.version);
  });
  return out;
}

ModelManifest ModelRegistry::get(const std::string& model_id) const {
  std::lock_guard lock(mutex_);
  auto it = models_.find(model_id);
  if (it == models_.end()) throw NotFoundError("model not found", model_id);
  return it->second;
}

// Reference model ------------------------------------------------------------

VoxelMask largest_component(const VoxelMask& mask) {
  const Grid& g = mask.grid();
  const std::int64_t n = g.voxel_count();
  std::vector<std::int32_t> label(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> stack;
  std::int32_t best_label = 0;
  std::int64_t best_size = 0;
  std::int32_t next = 0;
  const std::int64_t plane = g.slice_size();

  for (std::int64_t seed = 0; seed < n; ++seed) {
    if (!mask.test(seed) || label[seed] != 0) continue;
    ++next;
    std::int64_t size = 0;
    label[seed] = next;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::int64_t v = stack.back();
      stack.pop_back();
      ++size;
      const std::int64_t i = v % g.cols;
      const std::int64_t j = (v / g.cols) % g.rows;
      const std::int64_t k = v / plane;
      auto visit = [&](std::int64_t u) {
        if (mask.test(u) && label[u] == 0) {
          label[u] = next;
          stack.push_back(u);
        }
      };
      if (i > 0) visit(v - 1);
      if (i + 1 < g.cols) visit(v + 1);
      if (j > 0) visit(v - g.cols);
      if (j + 1 < g.rows) visit(v + g.cols);
      if (k > 0) visit(v - plane);
      if (k + 1 < g.slices) visit(v + plane);
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
  }
  VoxelMask out(g);
  if (best_label == 0) return out;
  for (std::int64_t v = 0; v < n; ++v) {
    if (label[v] == best_label) out.set(v);
  }
  return out;
}

std::vector<std::uint16_t> run_threshold_model(const ImageSeries& series,
                                               const ModelManifest& manifest) {
  const json& params = manifest.params;
  struct Window {
    std::uint16_t label;
    double lo, hi;
  };
  std::vector<Window> windows;
  try {
    if (params.contains("windows")) {
      for (const auto& [roi, label] : manifest.label_map) {
        if (!params["windows"].contains(roi)) {
          throw ArgumentError("params.windows has no entry for ROI", roi);
        }
        const auto& w = params["windows"][roi];
        windows.push_back({static_cast<std::uint16_t>(label), w.at(0).get<double>(), w.at(1).get<double>()});
      }
    } else if (params.contains("threshold") && manifest.label_map.size() == 1) {
      windows.push_back({static_cast<std::uint16_t>(manifest.label_map.begin()->second),
                         params["threshold"].get<double>(), INFINITY});
    } else {
      throw ArgumentError("threshold model needs params.threshold (one label) or params.windows");
    }
  } catch (const json::exception& e) {
    throw ArgumentError("malformed threshold model params", e.what());
  }
  const bool keep_largest = params.value("largest_component", true);

  std::vector<std::uint16_t> labels(series.voxels.size(), 0);
  for (const auto& w : windows) {
    VoxelMask m(series.grid);
    for (std::size_t n = 0; n < series.voxels.size(); ++n) {
      const double v = series.voxels[n];
      if (v > w.lo && v <= w.hi) m.set(static_cast<std::int64_t>(n));
    }
    if (keep_largest) m = largest_component(m);
    for (std::int64_t n = 0; n < m.size(); ++n) {
      if (m.test(n)) labels[static_cast<std::size_t>(n)] = w.label;
    }
  }
  return labels;
}

// Staging --------------------------------------------------------------------

namespace {

json read_json_file(const fs::path& path) {
  const Bytes raw = read_file(path);
  try {
    return json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in " + path.filename().string(), e.what());
  }
}

}  // namespace

void stage_input(const fs::path& workspace, const ImageSeries& series, const ModelManifest& manifest) {
  const fs::path input = workspace / "input";
  fs::create_directories(input);
  std::string volume(series.voxels.size() * 2, '\0');
  for (std::size_t n = 0; n < series.voxels.size(); ++n) {
    const auto v = static_cast<std::uint16_t>(series.voxels[n]);
    volume[2 * n] = static_cast<char>(v & 0xff);
    volume[2 * n + 1] = static_cast<char>(v >> 8);
  }
  write_file_atomic(input / "volume.bin", volume);
  const json meta = {{"series_id", series.series_id},
                     {"study_id", series.study_id},
                     {"modality", series.modality},
                     {"dtype", "int16le"},
                     {"grid", grid_to_json(series.grid)}};
  write_file_atomic(input / "series.meta", meta.dump(2));
  write_file_atomic(input / "manifest.json", manifest_to_json(manifest).dump(2));
}

StagedInput read_staged_input(const fs::path& workspace) {
  const fs::path input = workspace / "input";
  const json meta = read_json_file(input / "series.meta");
  StagedInput out;
  out.series.series_id = meta.value("series_id", std::string{});
  out.series.study_id = meta.value("study_id", std::string{});
  out.series.modality = meta.value("modality", std::string{});
  out.series.grid = grid_from_json(meta.at("grid"));
  const Bytes raw = read_file(input / "volume.bin");
  if (raw.size() != static_cast<std::size_t>(out.series.grid.voxel_count()) * 2) {
    throw CodecError("volume.bin size does not match the grid");
  }
  out.series.voxels.resize(raw.size() / 2);
  for (std::size_t n = 0; n < out.series.voxels.size(); ++n) {
    out.series.voxels[n] = static_cast<std::int16_t>(
        static_cast<std::uint16_t>(raw[2 * n] | (raw[2 * n + 1] << 8)));
  }
  out.manifest = manifest_from_json(read_json_file(input / "manifest.json"));
  return out;
}

void write_labels(const fs::path& workspace, const Grid& grid, std::span<const std::uint16_t> labels) {
  const fs::path output = workspace / "output";
  fs::create_directories(output);
  std::string raw(labels.size() * 2, '\0');
  for (std::size_t n = 0; n < labels.size(); ++n) {
    raw[2 * n] = static_cast<char>(labels[n] & 0xff);
    raw[2 * n + 1] = static_cast<char>(labels[n] >> 8);
  }
  write_file_atomic(output / "labels.bin", raw);
  const json meta = {{"dtype", "uint16le"}, {"grid", grid_to_json(grid)}};
  write_file_atomic(output / "labels.meta", meta.dump(2));
}

std::vector<std::uint16_t> read_labels(const fs::path& workspace, const Grid& grid) {
  const fs::path output = workspace / "output";
  if (!fs::exists(output / "labels.bin")) throw ExecutorError("model produced no labels.bin");
  if (fs::exists(output / "labels.meta")) {
    const json meta = read_json_file(output / "labels.meta");
    if (meta.contains("grid") && !(grid_from_json(meta["grid"]) == grid)) {
      throw GridMismatchError("labels.meta grid differs from the series grid");
    }
  }
  const Bytes raw = read_file(output / "labels.bin");
  if (raw.size() != static_cast<std::size_t>(grid.voxel_count()) * 2) {
    throw CodecError("labels.bin size does not match the grid",
                     std::to_string(raw.size()) + " bytes");
  }
  std::vector<std::uint16_t> labels(raw.size() / 2);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    labels[n] = static_cast<std::uint16_t>(raw[2 * n] | (raw[2 * n + 1] << 8));
  }
  return labels;
}

void run_threshold_in_workspace(const fs::path& workspace) {
  const StagedInput in = read_staged_input(workspace);
  const auto labels = run_threshold_model(in.series, in.manifest);
  write_labels(workspace, in.series.grid, labels);
}

// Executors ------------------------------------------------------------------

LocalExecutor::LocalExecutor(std::string command_template)
    : command_template_(std::move(command_template)) {}

void LocalExecutor::provision(const fs::path&, const ModelManifest& model) {
  if (model.image != kBuiltinThresholdImage && command_template_.empty()) {
    throw UnsupportedError("local executor has no command configured for this image", model.image);
  }
}

void LocalExecutor::execute(const fs::path& workspace, const ModelManifest& model) {
  if (model.image == kBuiltinThresholdImage) {
    run_threshold_in_workspace(workspace);
    return;
  }
  auto quote = [](const std::string& s) {
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
  };
  std::string cmd = command_template_;
  const std::pair<std::string, std::string> subs[] = {
      {"{workspace}", quote(workspace.string())},
      {"{input}", quote((workspace / "input").string())},
      {"{output}", quote((workspace / "output").string())},
      {"{image}", quote(model.image)}};
  for (const auto& [key, value] : subs) {
    for (auto pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + value.size())) {
      cmd.replace(pos, key.size(), value);
    }
  }
  fs::create_directories(workspace / "output");
  const int rc = std::system(cmd.c_str());
  if (rc != 0) throw ExecutorError("model command failed", "exit status " + std::to_string(rc));
}

MockOutcome::Fault mock_fault_from_string(std::string_view text) {
  if (text == "none") return MockOutcome::Fault::None;
  if (text == "provision") return MockOutcome::Fault::Provision;
  if (text == "run") return MockOutcome::Fault::Run;
  if (text == "bad-output") return MockOutcome::Fault::BadOutput;
  throw ArgumentError("unknown mock fault", std::string(text));
}

MockExecutor::MockExecutor(MockOutcome default_outcome) : default_(std::move(default_outcome)) {}

void MockExecutor::script(MockOutcome outcome) {
  std::lock_guard lock(mutex_);
  scripted_.push_back(std::move(outcome));
}

void MockExecutor::provision(const fs::path&, const ModelManifest& model) {
  {
    std::lock_guard lock(mutex_);
    if (!scripted_.empty()) {
      current_ = scripted_.front();
      scripted_.pop_front();
    } else if (model.params.contains("mock")) {
      const json& m = model.params["mock"];
      current_ = default_;
      current_.fault = mock_fault_from_string(m.value("fault", std::string("none")));
      current_.provision_latency = std::chrono::milliseconds(m.value("provision_ms", 0));
      current_.run_latency = std::chrono::milliseconds(m.value("run_ms", 0));
      current_.message = m.value("message", current_.message);
    } else {
      current_ = default_;
    }
  }
  std::this_thread::sleep_for(current_.provision_latency);
  if (current_.fault == MockOutcome::Fault::Provision) throw ExecutorError(current_.message, "provision");
}

void MockExecutor::execute(const fs::path& workspace, const ModelManifest&) {
  std::this_thread::sleep_for(current_.run_latency);
  switch (current_.fault) {
    case MockOutcome::Fault::Run:
      throw ExecutorError(current_.message, "run");
    case MockOutcome::Fault::BadOutput:
      fs::create_directories(workspace / "output");
      write_file_atomic(workspace / "output" / "labels.bin", std::string_view("\x01"));
      return;
    default:
      run_threshold_in_workspace(workspace);
  }
}

void MockExecutor::suspend() noexcept {
  std::lock_guard lock(mutex_);
  current_ = {};
}

std::string_view to_string(ExecutorPhase phase) noexcept {
  switch (phase) {
    case ExecutorPhase::Suspended: return "Suspended";
    case ExecutorPhase::Provisioning: return "Provisioning";
    case ExecutorPhase::Active: return "Active";
  }
  return "Suspended";
}

json executor_state_to_json(const ExecutorState& s) {
  return {{"executor_id", s.executor_id},
          {"kind", s.kind},
          {"state", to_string(s.state)},
          {"current_job", s.current_job ? json(*s.current_job) : json(nullptr)},
          {"workspace", s.workspace.string()}};
}

// Jobs -----------------------------------------------------------------------

std::string_view to_string(JobState state) noexcept {
  switch (state) {
    case JobState::Queued: return "Queued";
    case JobState::Provisioning: return "Provisioning";
    case JobState::Running: return "Running";
    case JobState::Postprocessing: return "Postprocessing";
    case JobState::Completed: return "Completed";
    case JobState::Failed: return "Failed";
  }
  return "Failed";
}

JobState job_state_from_string(std::string_view text) {
  for (JobState s : {JobState::Queued, JobState::Provisioning, JobState::Running,
                     JobState::Postprocessing, JobState::Completed, JobState::Failed}) {
    if (to_string(s) == text) return s;
  }
  throw ParseError("unknown job state", std::string(text));
}

bool is_terminal(JobState state) noexcept {
  return state == JobState::Completed || state == JobState::Failed;
}

json job_to_json(const InferenceJob& job) {
  json history = json::array();
  for (const auto& t : job.history) {
    history.push_back({{"state", to_string(t.state)},
                       {"at_us", t.at_us},
                       {"at", format_timestamp(t.at_us)}});
  }
  json out = {{"job_id", job.job_id},
              {"model_id", job.model_id},
              {"series_id", job.series_id},
              {"idempotency_key", job.idempotency_key},
              {"state", to_string(job.state)},
              {"history", std::move(history)},
              {"executor_id", job.executor_id ? json(*job.executor_id) : json(nullptr)},
              {"result_version", job.result_version ? json(*job.result_version) : json(nullptr)}};
  if (job.state == JobState::Failed) {
    out["error"] = {{"code", job.error_code}, {"detail", job.error_detail}};
  }
  return out;
}

InferenceJob job_from_json(const json& doc) {
  try {
    InferenceJob job;
    job.job_id = doc.at("job_id").get<std::string>();
    job.model_id = doc.at("model_id").get<std::string>();
    job.series_id = doc.at("series_id").get<std::string>();
    job.idempotency_key = doc.value("idempotency_key", std::string{});
    job.state = job_state_from_string(doc.at("state").get<std::string>());
    for (const auto& t : doc.at("history")) {
      job.history.push_back({job_state_from_string(t.at("state").get<std::string>()),
                             t.at("at_us").get<std::int64_t>()});
    }
    if (doc.contains("executor_id") && !doc["executor_id"].is_null()) {
      job.executor_id = doc["executor_id"].get<std::string>();
    }
    if (doc.contains("result_version") && !doc["result_version"].is_null()) {
      job.result_version = doc["result_version"].get<std::int64_t>();
    }
    if (doc.contains("error")) {
      job.error_code = doc["error"].value("code", std::string{});
      job.error_detail = doc["error"].value("detail", std::string{});
    }
    return job;
  } catch (const json::exception& e) {
    throw ParseError("malformed job record", e.what());
  }
}

// Orchestrator ---------------------------------------------------------------

Orchestrator::Orchestrator(Store& store, ModelRegistry& registry, OrchestratorOptions options)
    : store_(store), registry_(registry), options_(options) {
  if (options_.queue_limit == 0) throw ArgumentError("queue limit must be positive");
  for (const auto& r : store_.job_records()) {
    InferenceJob job = job_from_json(r);
    const std::string digits = job.job_id.substr(job.job_id.find('-') + 1);
    next_job_ = std::max<std::int64_t>(next_job_, std::stoll(digits) + 1);
    if (!is_terminal(job.state)) {
      // The process stopped while this job was in flight.
      job.state = JobState::Failed;
      job.history.push_back({JobState::Failed, now_us()});
      job.error_code = std::string(to_string(ErrorCode::Internal));
      job.error_detail = "interrupted by restart";
      store_.put_job_record(job.job_id, job_to_json(job));
    }
    if (!job.idempotency_key.empty()) by_key_[job.idempotency_key] = job.job_id;
    jobs_.emplace(job.job_id, std::move(job));
  }
}

Orchestrator::~Orchestrator() { shutdown(); }

std::string Orchestrator::add_executor(std::unique_ptr<Executor> executor) {
  std::lock_guard lock(mutex_);
  if (stopping_) throw ArgumentError("orchestrator is shutting down");
  const std::string kind = executor->kind();
  const auto same_kind = std::count_if(slots_.begin(), slots_.end(),
                                       [&](const auto& s) { return s->state.kind == kind; });
  auto slot = std::make_unique<Slot>();
  slot->state.executor_id = kind + "-" + std::to_string(same_kind);
  slot->state.kind = kind;
  slot->state.workspace = store_.workspace_root() / slot->state.executor_id;
  std::error_code ec;
  fs::remove_all(slot->state.workspace, ec);  // leftovers from an earlier run
  fs::create_directories(slot->state.workspace);
  slot->executor = std::move(executor);
  Slot& ref = *slot;
  slots_.push_back(std::move(slot));
  ref.worker = std::thread([this, &ref] { worker_loop(ref); });
  return ref.state.executor_id;
}

std::vector<ExecutorState> Orchestrator::executors() const {
  std::lock_guard lock(mutex_);
  std::vector<ExecutorState> out;
  for (const auto& s : slots_) out.push_back(s->state);
  return out;
}

InferenceJob Orchestrator::submit(const std::string& model_id, const std::string& series_id,
                                  const std::string& idempotency_key) {
  {
    std::lock_guard lock(mutex_);
    if (!idempotency_key.empty()) {
      if (auto it = by_key_.find(idempotency_key); it != by_key_.end()) {
        const InferenceJob& job = jobs_.at(it->second);
        if (job.model_id != model_id || job.series_id != series_id) {
          throw ConflictError("idempotency key reused for a different job", idempotency_key);
        }
        return job;
      }
    }
  }
  const ModelManifest model = registry_.get(model_id);
  const SeriesSummary series = store_.series_info(series_id);
  if (!model.modality.empty() && model.modality != series.modality) {
    throw ArgumentError("model does not accept this modality", model.modality + " vs " + series.modality);
  }

  std::unique_lock lock(mutex_);
  if (stopping_) throw BusyError("service is shutting down");
  if (slots_.empty()) throw BusyError("no executor is configured");
  if (!idempotency_key.empty()) {
    if (auto it = by_key_.find(idempotency_key); it != by_key_.end()) return jobs_.at(it->second);
  }
  if (queue_.size() >= options_.queue_limit) {
    throw BusyError("job queue is full", std::to_string(options_.queue_limit) + " queued");
  }
  char id[32];
  std::snprintf(id, sizeof id, "job-%06lld", static_cast<long long>(next_job_++));
  InferenceJob job;
  job.job_id = id;
  job.model_id = model_id;
  job.series_id = series_id;
  job.idempotency_key = idempotency_key;
  job.state = JobState::Queued;
  job.history.push_back({JobState::Queued, now_us()});
  store_.put_job_record(job.job_id, job_to_json(job));
  jobs_.emplace(job.job_id, job);
  if (!idempotency_key.empty()) by_key_[idempotency_key] = job.job_id;
  queue_.push_back(job.job_id);
  lock.unlock();
  work_.notify_one();
  changed_.notify_all();
  return job;
}

InferenceJob Orchestrator::status(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFoundError("job not found", job_id);
  return it->second;
}

std::vector<InferenceJob> Orchestrator::jobs() const {
  std::lock_guard lock(mutex_);
  std::vector<InferenceJob> out;
  for (const auto& [id, j] : jobs_) out.push_back(j);
  return out;
}

InferenceJob Orchestrator::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFoundError("job not found", job_id);
  changed_.wait_for(lock, timeout, [&] { return is_terminal(jobs_.at(job_id).state); });
  return jobs_.at(job_id);
}

void Orchestrator::shutdown() {
  std::vector<std::string> dropped;
  {
    std::lock_guard lock(mutex_);
    if (stopping_) return;
    stopping_ = true;
    dropped.assign(queue_.begin(), queue_.end());
    queue_.clear();
  }
  for (const auto& id : dropped) {
    transition(id, JobState::Failed, [](InferenceJob& j) {
      j.error_code = "shutdown";
      j.error_detail = "service shut down before the job started";
    });
  }
  work_.notify_all();
  for (auto& s : slots_) {
    if (s->worker.joinable()) s->worker.join();
  }
}

void Orchestrator::transition(const std::string& job_id, JobState next,
                              const std::function<void(InferenceJob&)>& update) {
  json record;
  {
    std::lock_guard lock(mutex_);
    InferenceJob& job = jobs_.at(job_id);
    job.state = next;
    job.history.push_back({next, now_us()});
    if (update) update(job);
    record = job_to_json(job);
    // Persist under the lock so records reach the log in transition order.
    store_.put_job_record(job_id, record);
  }
  changed_.notify_all();
}

void Orchestrator::set_phase(Slot& slot, ExecutorPhase phase, std::optional<std::string> job) {
  std::lock_guard lock(mutex_);
  slot.state.state = phase;
  slot.state.current_job = std::move(job);
}

void Orchestrator::clear_workspace(const Slot& slot, const std::string& series_id) noexcept {
  try {
    store_.purge_series(series_id, PurgeScope::ComputeCopies);
  } catch (...) {
    // The series may have been purged meanwhile; the sweep below still runs.
  }
  std::error_code ec;
  for (const auto& child : fs::directory_iterator(slot.state.workspace, ec)) {
    fs::remove_all(child.path(), ec);
  }
}

void Orchestrator::worker_loop(Slot& slot) {
  for (;;) {
    std::string job_id;
    {
      std::unique_lock lock(mutex_);
      work_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job_id = queue_.front();
      queue_.pop_front();
    }
    run_job(slot, job_id);
  }
}

void Orchestrator::run_job(Slot& slot, const std::string& job_id) {
  const std::string executor_id = slot.state.executor_id;
  const InferenceJob snapshot = status(job_id);
  const fs::path& ws = slot.state.workspace;
  std::optional<std::int64_t> version;
  std::string error_code, error_detail;

  try {
    set_phase(slot, ExecutorPhase::Provisioning, job_id);
    transition(job_id, JobState::Provisioning,
               [&](InferenceJob& j) { j.executor_id = executor_id; });
    const ModelManifest model = registry_.get(snapshot.model_id);
    const ImageSeries series = store_.get_series(snapshot.series_id);
    write_file_atomic(ws / ".series", series.series_id);
    stage_input(ws, series, model);
    slot.executor->provision(ws, model);

    set_phase(slot, ExecutorPhase::Active, job_id);
    transition(job_id, JobState::Running);
    slot.executor->execute(ws, model);

    transition(job_id, JobState::Postprocessing);
    const auto labels = read_labels(ws, series.grid);
    SegmentationSet set;
    set.series_ref = series.series_id;
    set.grid = series.grid;
    set.provenance.source = ProvenanceSource::Model;
    set.provenance.model_id = model.model_id;
    set.provenance.model_version = model.version;
    std::map<std::uint16_t, std::size_t> slot_of;
    std::size_t idx = 0;
    for (const auto& [roi, label] : model.label_map) {
      slot_of[static_cast<std::uint16_t>(label)] = set.rois.size();
      set.rois.push_back({Roi{label, roi, palette_color(idx++)}, VoxelMask(series.grid)});
    }
    for (std::size_t n = 0; n < labels.size(); ++n) {
      if (labels[n] == 0) continue;
      auto it = slot_of.find(labels[n]);
      if (it == slot_of.end()) {
        throw CodecError("model output contains a label missing from the label map",
                         std::to_string(labels[n]));
      }
      set.rois[it->second].mask.set(static_cast<std::int64_t>(n));
    }
    version = store_.put_segmentation(series.series_id, set);
  } catch (const Error& e) {
    error_code = std::string(to_string(e.code()));
    error_detail = std::string(e.what()) + (e.detail().empty() ? "" : ": " + e.detail());
  } catch (const std::exception& e) {
    error_code = std::string(to_string(ErrorCode::Internal));
    error_detail = e.what();
  }

  clear_workspace(slot, snapshot.series_id);
  slot.executor->suspend();
  set_phase(slot, ExecutorPhase::Suspended, std::nullopt);

  if (version) {
    transition(job_id, JobState::Completed, [&](InferenceJob& j) { j.result_version = version; });
  } else {
    transition(job_id, JobState::Failed, [&](InferenceJob& j) {
      j.error_code = error_code;
      j.error_detail = error_detail;
    });
  }
}

}  // namespace segstudio
