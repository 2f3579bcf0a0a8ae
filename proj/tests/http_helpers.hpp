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

// Small HTTP client wrappers shared by the API and acceptance suites.

#pragma once

#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "segstudio/util.hpp"

namespace testhttp {

using nlohmann::json;

struct Reply {
  int status = 0;
  std::string body;
  httplib::Headers headers;
  [[nodiscard]] json doc() const { return json::parse(body); }
};

class Client {
 public:
  Client(int port, std::string token = {}) : cli_("127.0.0.1", port), token_(std::move(token)) {
    cli_.set_read_timeout(120, 0);
    cli_.set_write_timeout(120, 0);
  }

  Reply get(const std::string& path) { return wrap(cli_.Get(path, headers())); }
  Reply del(const std::string& path) { return wrap(cli_.Delete(path, headers())); }
  Reply post(const std::string& path, const json& body, httplib::Headers extra = {}) {
    httplib::Headers h = headers();
    h.insert(extra.begin(), extra.end());
    return wrap(cli_.Post(path, h, body.dump(), "application/json"));
  }
  Reply post_raw(const std::string& path, const std::string& body, const std::string& type) {
    return wrap(cli_.Post(path, headers(), body, type));
  }
  Reply upload(const std::vector<segstudio::Bytes>& files) {
    httplib::MultipartFormDataItems items;
    for (std::size_t n = 0; n < files.size(); ++n) {
      items.push_back({"files", std::string(files[n].begin(), files[n].end()),
                       "slice_" + std::to_string(n) + ".dcm", "application/dicom"});
    }
    return wrap(cli_.Post("/studies", headers(), items));
  }

  /// Polls GET /jobs/{id} until the job is terminal.
  json wait_job(const std::string& job_id, std::chrono::seconds timeout = std::chrono::seconds(60)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const Reply r = get("/jobs/" + job_id);
      if (r.status != 200) throw std::runtime_error("job poll failed: " + r.body);
      json j = r.doc();
      if (j["state"] == "Completed" || j["state"] == "Failed") return j;
      if (std::chrono::steady_clock::now() > deadline) return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

 private:
  httplib::Headers headers() const {
    if (token_.empty()) return {};
    return {{"Authorization", "Bearer " + token_}};
  }
  static Reply wrap(const httplib::Result& r) {
    if (!r) throw std::runtime_error("HTTP request failed: " + httplib::to_string(r.error()));
    return {r->status, r->body, r->headers};
  }

  httplib::Client cli_;
  std::string token_;
};

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag = "api") {
    path = std::filesystem::temp_directory_path() /
           ("segstudio-" + tag + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(segstudio::now_us()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace testhttp
