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

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "segstudio/store.hpp"

namespace segstudio {

// Model registry ---------------------------------------------------------------

/// Image reference that selects the in-process threshold model.
inline constexpr std::string_view kBuiltinThresholdImage = "builtin:threshold";

struct ModelManifest {
  std::string model_id;  // assigned on registration
  std::string name;
  std::string version;
  std::string image;                        // opaque container reference
  std::map<std::string, int> label_map;     // ROI name -> output label
  std::string modality;                     // empty accepts any
  nlohmann::json resources = nlohmann::json::object();
  nlohmann::json params = nlohmann::json::object();
  std::int64_t registered_at_us = 0;
};

nlohmann::json manifest_to_json(const ModelManifest& m);
ModelManifest manifest_from_json(const nlohmann::json& doc);

class ModelRegistry {
 public:
  explicit ModelRegistry(Store& store);

  /// Throws ArgumentError for an empty name, version, image or label map, or
  /// labels outside 1..65535; ConflictError for a repeated (name, version).
  ModelManifest register_model(ModelManifest manifest);

  /// Sorted by name, then version.
  [[nodiscard]] std::vector<ModelManifest> list() const;
  [[nodiscard]] ModelManifest get(const std::string& model_id) const;

 private:
  Store& store_;
  mutable std::mutex mutex_;
  std::map<std::string, ModelManifest> models_;
};

// Reference model ------------------------------------------------------------

/// Keeps the largest 6-connected component. Ties go to the component
/// holding the lowest linear index.
VoxelMask largest_component(const VoxelMask& mask);

/// Threshold model. With one label, `params.threshold` selects voxels with
/// intensity strictly above it. With several, `params.windows` maps each ROI
/// name to [lo, hi] and selects lo < v <= hi (on overlap the ROI name that
/// sorts last wins).
/// Unless `params.largest_component` is false, each label keeps only its
/// largest 6-connected component.
std::vector<std::uint16_t> run_threshold_model(const ImageSeries& series,
                                               const ModelManifest& manifest);

// Workspace staging ----------------------------------------------------------

/// workspace/input/{volume.bin, series.meta, manifest.json}. volume.bin is
/// little-endian int16 in storage order; series.meta carries ids and grid.
void stage_input(const std::filesystem::path& workspace, const ImageSeries& series,
                 const ModelManifest& manifest);

struct StagedInput {
  ImageSeries series;
  ModelManifest manifest;
};
StagedInput read_staged_input(const std::filesystem::path& workspace);

/// workspace/output/{labels.bin, labels.meta}. labels.bin is little-endian
/// uint16 in storage order.
void write_labels(const std::filesystem::path& workspace, const Grid& grid,
                  std::span<const std::uint16_t> labels);
std::vector<std::uint16_t> read_labels(const std::filesystem::path& workspace, const Grid& grid);

/// Reads the staged input, runs the threshold model, writes the output.
void run_threshold_in_workspace(const std::filesystem::path& workspace);

// Executors ------------------------------------------------------------------

class Executor {
 public:
  virtual ~Executor() = default;
  [[nodiscard]] virtual std::string kind() const = 0;
  /// Brings compute up for one job. The input is already staged.
  virtual void provision(const std::filesystem::path& workspace, const ModelManifest& model) = 0;
  /// Runs the model on workspace/input and leaves workspace/output.
  virtual void execute(const std::filesystem::path& workspace, const ModelManifest& model) = 0;
  /// Releases compute. Called after every job, successful or not.
  virtual void suspend() noexcept = 0;
};

/// Runs the threshold model in-process for the builtin image, otherwise the
/// configured shell command with {workspace}, {input}, {output} and {image}
/// substituted.
class LocalExecutor final : public Executor {
 public:
  explicit LocalExecutor(std::string command_template = {});
  [[nodiscard]] std::string kind() const override { return "local"; }
  void provision(const std::filesystem::path& workspace, const ModelManifest& model) override;
  void execute(const std::filesystem::path& workspace, const ModelManifest& model) override;
  void suspend() noexcept override {}

 private:
  std::string command_template_;
};

struct MockOutcome {
  enum class Fault { None, Provision, Run, BadOutput };
  std::chrono::milliseconds provision_latency{0};
  std::chrono::milliseconds run_latency{0};
  Fault fault = Fault::None;
  std::string message = "injected fault";
};

MockOutcome::Fault mock_fault_from_string(std::string_view text);

/// Scripted executor. Outcomes queued with script() are consumed one per job;
/// without one, a model's `params.mock` object ({"fault", "provision_ms",
/// "run_ms", "message"}) applies, then the default. A successful run executes
/// the threshold model.
class MockExecutor final : public Executor {
 public:
  explicit MockExecutor(MockOutcome default_outcome = {});
  void script(MockOutcome outcome);
  [[nodiscard]] std::string kind() const override { return "mock"; }
  void provision(const std::filesystem::path& workspace, const ModelManifest& model) override;
  void execute(const std::filesystem::path& workspace, const ModelManifest& model) override;
  void suspend() noexcept override;

 private:
  std::mutex mutex_;
  std::deque<MockOutcome> scripted_;
  MockOutcome default_;
  MockOutcome current_;
};

enum class ExecutorPhase { Suspended, Provisioning, Active };
std::string_view to_string(ExecutorPhase phase) noexcept;

struct ExecutorState {
  std::string executor_id;
  std::string kind;
  ExecutorPhase state = ExecutorPhase::Suspended;
  std::optional<std::string> current_job;
  std::filesystem::path workspace;
};

nlohmann::json executor_state_to_json(const ExecutorState& s);

// Jobs -----------------------------------------------------------------------

enum class JobState { Queued, Provisioning, Running, Postprocessing, Completed, Failed };
std::string_view to_string(JobState state) noexcept;
JobState job_state_from_string(std::string_view text);
bool is_terminal(JobState state) noexcept;

struct JobTransition {
  JobState state = JobState::Queued;
  std::int64_t at_us = 0;
};

struct InferenceJob {
  std::string job_id;
  std::string model_id;
  std::string series_id;
  std::string idempotency_key;
  JobState state = JobState::Queued;
  std::vector<JobTransition> history;
  std::optional<std::string> executor_id;
  std::optional<std::int64_t> result_version;
  std::string error_code;
  std::string error_detail;
};

nlohmann::json job_to_json(const InferenceJob& job);
InferenceJob job_from_json(const nlohmann::json& doc);

struct OrchestratorOptions {
  std::size_t queue_limit = 64;
};

/// Shared FIFO queue drained by one worker thread per executor. Each
/// executor runs one job at a time and is suspended with an empty workspace
/// before its job reaches a terminal state.
class Orchestrator {
 public:
  Orchestrator(Store& store, ModelRegistry& registry, OrchestratorOptions options = {});
  ~Orchestrator();

  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  /// Returns the executor id ("<kind>-<n>") and starts its worker.
  std::string add_executor(std::unique_ptr<Executor> executor);
  [[nodiscard]] std::vector<ExecutorState> executors() const;

  /// Throws NotFoundError for an unknown model or series, ArgumentError for a
  /// modality the model does not accept, BusyError when the queue is full,
  /// ConflictError when the idempotency key was used for a different request.
  /// A repeated key returns the original job.
  InferenceJob submit(const std::string& model_id, const std::string& series_id,
                      const std::string& idempotency_key = {});

  [[nodiscard]] InferenceJob status(const std::string& job_id) const;
  [[nodiscard]] std::vector<InferenceJob> jobs() const;

  /// Blocks until the job is terminal or the timeout passes; returns the
  /// latest snapshot either way.
  InferenceJob wait(const std::string& job_id, std::chrono::milliseconds timeout) const;

  /// Stops intake, fails every queued job with "shutdown" and lets running
  /// jobs finish. Idempotent.
  void shutdown();

 private:
  struct Slot {
    std::unique_ptr<Executor> executor;
    ExecutorState state;
    std::thread worker;
  };

  void worker_loop(Slot& slot);
  void run_job(Slot& slot, const std::string& job_id);
  void transition(const std::string& job_id, JobState next,
                  const std::function<void(InferenceJob&)>& update = {});
  void set_phase(Slot& slot, ExecutorPhase phase, std::optional<std::string> job);
  void clear_workspace(const Slot& slot, const std::string& series_id) noexcept;

  Store& store_;
  ModelRegistry& registry_;
  OrchestratorOptions options_;

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::condition_variable work_;
  std::map<std::string, InferenceJob> jobs_;
  std::map<std::string, std::string> by_key_;
  std::deque<std::string> queue_;
  std::vector<std::unique_ptr<Slot>> slots_;
  std::int64_t next_job_ = 1;
  bool stopping_ = false;
};

}  // namespace segstudio
