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

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "segstudio/errors.hpp"
#include "segstudio/orchestrator.hpp"
#include "segstudio/store.hpp"

namespace segstudio {

inline constexpr std::string_view kServiceName = "segstudio";
inline constexpr std::string_view kServiceVersion = "0.1.0";

struct ApiConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path data_dir = "segstudio-data";
  std::string executor = "local";  // local | mock
  int max_jobs = 1;                // executors, i.e. jobs running at once
  std::size_t queue_limit = 64;
  std::string token;  // empty disables auth
  std::size_t max_upload_mb = 512;
  std::string local_command;   // LocalExecutor command for non-builtin images
  std::string pseudonym_salt;  // patient pseudonymisation salt
  std::string log_level = "info";

  /// Throws ArgumentError when a field is out of range.
  void validate() const;
};

/// HTTP status for an error code.
int http_status(ErrorCode code) noexcept;

/// {"code", "message", "detail"}
nlohmann::json error_body(const Error& e);

/// The HTTP service. Endpoints:
///
///   GET    /health
///   GET    /executors
///   POST   /studies                                   multipart DICOM files
///   GET    /studies
///   GET    /series/{id}
///   DELETE /series/{id}                               purge everything
///   GET    /series/{id}/slices/{k}                    raw int16 LE slice
///   POST   /series/{id}/segmentations                 exchange document
///   GET    /series/{id}/segmentations
///   GET    /series/{id}/segmentations/{v}
///   POST   /series/{id}/segmentations/{v}/edits       brush operations
///   POST   /evaluate
///   GET    /models
///   POST   /models
///   POST   /jobs                                      Idempotency-Key honoured
///   GET    /jobs
///   GET    /jobs/{id}
///   POST   /export                                    application/x-tar
///
/// With a token configured, every endpoint except /health requires
/// "Authorization: Bearer <token>".
class Service {
 public:
  explicit Service(ApiConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread. Throws StartupError when the
  /// port cannot be bound.
  void start();

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  /// Stops accepting requests, lets running jobs finish and fails queued
  /// ones with "shutdown". Idempotent.
  void stop();

  [[nodiscard]] int port() const noexcept { return port_; }
  [[nodiscard]] const ApiConfig& config() const noexcept { return config_; }
  [[nodiscard]] Store& store() noexcept { return *store_; }
  [[nodiscard]] ModelRegistry& registry() noexcept { return *registry_; }
  [[nodiscard]] Orchestrator& orchestrator() noexcept { return *orchestrator_; }

 private:
  struct Impl;
  ApiConfig config_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<ModelRegistry> registry_;
  std::unique_ptr<Orchestrator> orchestrator_;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace segstudio
