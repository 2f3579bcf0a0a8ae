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

#include "segstudio/api.hpp"

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "segstudio/analysis.hpp"
#include "segstudio/bundle.hpp"
#include "segstudio/dicom.hpp"
#include "segstudio/exchange.hpp"

namespace segstudio {

using nlohmann::json;

void ApiConfig::validate() const {
  if (port < 0 || port > 65535) throw ArgumentError("port out of range", std::to_string(port));
  if (data_dir.empty()) throw ArgumentError("data directory must be set");
  if (executor != "local" && executor != "mock") {
    throw ArgumentError("executor must be local or mock", executor);
  }
  if (max_jobs < 1) throw ArgumentError("max jobs must be at least 1");
  if (queue_limit < 1) throw ArgumentError("queue limit must be at least 1");
  if (max_upload_mb < 1) throw ArgumentError("max upload size must be at least 1 MB");
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Argument:
    case ErrorCode::Bounds:
    case ErrorCode::Codec:
    case ErrorCode::Parse: return 400;
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict: return 409;
    case ErrorCode::PayloadTooLarge: return 413;
    case ErrorCode::Unsupported: return 415;
    case ErrorCode::Geometry:
    case ErrorCode::MixedSeries:
    case ErrorCode::GridMismatch:
    case ErrorCode::SeriesMismatch: return 422;
    case ErrorCode::Executor: return 502;
    case ErrorCode::Busy: return 503;
    case ErrorCode::Integrity:
    case ErrorCode::Startup:
    case ErrorCode::Internal: return 500;
  }
  return 500;
}

json error_body(const Error& e) {
  return {{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
}

namespace {

json summary_json(const SeriesSummary& s) {
  return {{"series_id", s.series_id},
          {"study_id", s.study_id},
          {"modality", s.modality},
          {"patient_pseudonym", s.patient_pseudonym},
          {"grid", grid_to_json(s.grid)},
          {"blob_sha256", s.blob},
          {"segmentation_count", s.segmentation_count}};
}

json version_json(const VersionEntry& v) {
  return {{"version", v.version},
          {"parent_version", v.parent_version ? json(*v.parent_version) : json(nullptr)},
          {"provenance", provenance_to_json(v.provenance)},
          {"blob_sha256", v.blob}};
}

json report_entry_json(const ReportEntry& r) {
  return {{"report_id", r.report_id},
          {"pred_version", r.pred_version},
          {"gt_version", r.gt_version},
          {"discrepancy_version",
           r.discrepancy_version ? json(*r.discrepancy_version) : json(nullptr)}};
}

json manifest_public_json(const ModelManifest& m) { return manifest_to_json(m); }

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ParseError("request body is not valid JSON", e.what());
  }
}

std::int64_t parse_int(const std::string& text, std::string_view what) {
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw ArgumentError(std::string(what) + " must be an integer", text);
  }
  return v;
}

/// Reads an integer field that may be spelled two ways.
template <class T>
T field(const json& body, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (body.contains(n) && !body[n].is_null()) {
      try {
        return body[n].get<T>();
      } catch (const json::exception& e) {
        throw ArgumentError(std::string("field has the wrong type: ") + n, e.what());
      }
    }
  }
  throw ArgumentError(std::string("missing field: ") + *names.begin());
}

template <class T>
std::optional<T> optional_field(const json& body, const char* name) {
  if (!body.contains(name) || body[name].is_null()) return std::nullopt;
  return field<T>(body, {name});
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.code()), error_body(e));
}

Brush brush_from_json(const json& op) {
  Brush b;
  try {
    const auto& c = op.at("center");
    if (!c.is_array() || c.size() != 3) throw ArgumentError("brush center must be [x, y, z]");
    b.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
    b.radius = op.at("radius").get<double>();
    const std::string shape = op.value("shape", std::string("sphere"));
    if (shape == "sphere") {
      b.shape = BrushShape::Sphere3d;
    } else if (shape == "disk") {
      b.shape = BrushShape::Disk2d;
      b.slice = op.at("slice").get<std::int64_t>();
    } else {
      throw ArgumentError("brush shape must be sphere or disk", shape);
    }
    const std::string mode = op.value("mode", std::string("paint"));
    if (mode == "paint") {
      b.mode = BrushMode::Paint;
    } else if (mode == "erase") {
      b.mode = BrushMode::Erase;
    } else {
      throw ArgumentError("brush mode must be paint or erase", mode);
    }
  } catch (const json::exception& e) {
    throw ArgumentError("malformed brush operation", e.what());
  }
  return b;
}

}  // namespace

struct Service::Impl {
  httplib::Server server;
  std::thread thread;
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;
  bool started = false;
};

Service::Service(ApiConfig config) : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  config_.validate();
  spdlog::set_level(spdlog::level::from_str(config_.log_level));
  store_ = std::make_unique<Store>(StoreOptions{config_.data_dir, {}});
  registry_ = std::make_unique<ModelRegistry>(*store_);
  orchestrator_ = std::make_unique<Orchestrator>(*store_, *registry_,
                                                 OrchestratorOptions{config_.queue_limit});
  for (int n = 0; n < config_.max_jobs; ++n) {
    if (config_.executor == "mock") {
      orchestrator_->add_executor(std::make_unique<MockExecutor>());
    } else {
      orchestrator_->add_executor(std::make_unique<LocalExecutor>(config_.local_command));
    }
  }

  auto& svr = impl_->server;
  svr.set_payload_max_length(config_.max_upload_mb * 1024 * 1024);
  // SO_REUSEADDR only: the library default adds SO_REUSEPORT, which would let a
  // second instance share the port silently.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::info("{} {} -> {}", req.method, req.path, res.status);
  });

  svr.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (config_.token.empty() || req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
    const std::string auth = req.get_header_value("Authorization");
    if (auth == "Bearer " + config_.token) return httplib::Server::HandlerResponse::Unhandled;
    send_error(res, UnauthorizedError("missing or invalid bearer token"));
    return httplib::Server::HandlerResponse::Handled;
  });

  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 413) {
      send_error(res, PayloadTooLargeError("request body exceeds the upload limit"));
    } else if (res.status == 404) {
      send_error(res, NotFoundError("no such endpoint", req.method + " " + req.path));
    } else {
      send_json(res, res.status,
                {{"code", "http_error"}, {"message", httplib::status_message(res.status)}, {"detail", ""}});
    }
    return httplib::Server::HandlerResponse::Handled;
  });

  // Every route body runs through this so errors map to {code, message, detail}.
  using Body = std::function<void(const httplib::Request&, httplib::Response&)>;
  auto guard = [](Body body) {
    return [body = std::move(body)](const httplib::Request& req, httplib::Response& res) {
      try {
        body(req, res);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::Internal || e.code() == ErrorCode::Integrity) {
          spdlog::error("{} {}: {} ({})", req.method, req.path, e.what(), e.detail());
        }
        send_error(res, e);
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, Error(ErrorCode::Internal, "internal error", e.what()));
      }
    };
  };

  svr.Get("/health", guard([](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"service", kServiceName}, {"version", kServiceVersion}, {"status", "ok"}});
  }));

  svr.Get("/executors", guard([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& e : orchestrator_->executors()) out.push_back(executor_state_to_json(e));
    send_json(res, 200, out);
  }));

  // Studies and series --------------------------------------------------------

  svr.Post("/studies", guard([this](const httplib::Request& req, httplib::Response& res) {
    std::vector<Bytes> files;
    if (req.is_multipart_form_data()) {
      for (const auto& [name, file] : req.files) files.emplace_back(file.content.begin(), file.content.end());
    } else if (req.get_header_value("Content-Type") == "application/dicom") {
      files.emplace_back(req.body.begin(), req.body.end());
    } else {
      throw UnsupportedError("upload DICOM files as multipart/form-data or application/dicom");
    }
    if (files.empty()) throw ArgumentError("no files uploaded");
    const ImageSeries series = parse_series(files, ParseOptions{config_.pseudonym_salt});
    store_->put_series(series);
    send_json(res, 201, summary_json(store_->series_info(series.series_id)));
  }));

  svr.Get("/studies", guard([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& study : store_->list_studies()) {
      json series = json::array();
      for (const auto& s : study.series) series.push_back(summary_json(s));
      out.push_back({{"study_id", study.study_id}, {"series", std::move(series)}});
    }
    send_json(res, 200, out);
  }));

  svr.Get(R"(/series/([^/]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    json out = summary_json(store_->series_info(id));
    out["segmentations"] = json::array();
    for (const auto& v : store_->list_versions(id)) out["segmentations"].push_back(version_json(v));
    out["reports"] = json::array();
    for (const auto& r : store_->list_reports(id)) out["reports"].push_back(report_entry_json(r));
    send_json(res, 200, out);
  }));

  svr.Delete(R"(/series/([^/]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
    const PurgeReceipt r = store_->purge_series(req.matches[1], PurgeScope::Everything);
    send_json(res, 200,
              {{"series_id", r.series_id},
               {"scope", to_string(r.scope)},
               {"removed_blobs", r.removed_blobs},
               {"removed_workspace_files", r.removed_workspace_files}});
  }));

  svr.Get(R"(/series/([^/]+)/slices/([^/]+))",
          guard([this](const httplib::Request& req, httplib::Response& res) {
            const ImageSeries s = store_->get_series(req.matches[1]);
            const std::int64_t k = parse_int(req.matches[2], "slice index");
            if (k < 0 || k >= s.grid.slices) {
              throw BoundsError("slice index out of range", std::to_string(k));
            }
            const auto [lo, hi] = std::minmax_element(s.voxels.begin(), s.voxels.end());
            const std::size_t plane = static_cast<std::size_t>(s.grid.slice_size());
            std::string body(plane * 2, '\0');
            for (std::size_t n = 0; n < plane; ++n) {
              const auto v = static_cast<std::uint16_t>(s.voxels[static_cast<std::size_t>(k) * plane + n]);
              body[2 * n] = static_cast<char>(v & 0xff);
              body[2 * n + 1] = static_cast<char>(v >> 8);
            }
            const double width = std::max(1.0, double(*hi) - double(*lo));
            res.set_header("X-Rows", std::to_string(s.grid.rows));
            res.set_header("X-Cols", std::to_string(s.grid.cols));
            res.set_header("X-Slice-Index", std::to_string(k));
            res.set_header("X-Pixel-Format", "int16le");
            res.set_header("X-Window-Center", std::to_string((double(*hi) + double(*lo)) / 2));
            res.set_header("X-Window-Width", std::to_string(width));
            res.status = 200;
            res.set_content(std::move(body), "application/octet-stream");
          }));

  // Segmentations -------------------------------------------------------------

  svr.Post(R"(/series/([^/]+)/segmentations)",
           guard([this](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             SegmentationSet set = segmentation_from_json(parse_body(req));
             if (set.series_ref.empty()) set.series_ref = id;
             set.provenance.created_at_us = 0;
             const std::int64_t v = store_->put_segmentation(id, set);
             send_json(res, 201, {{"series_id", id}, {"version", v}});
           }));

  svr.Get(R"(/series/([^/]+)/segmentations)",
          guard([this](const httplib::Request& req, httplib::Response& res) {
            json out = json::array();
            for (const auto& v : store_->list_versions(req.matches[1])) out.push_back(version_json(v));
            send_json(res, 200, out);
          }));

  svr.Get(R"(/series/([^/]+)/segmentations/([^/]+))",
          guard([this](const httplib::Request& req, httplib::Response& res) {
            const auto v = parse_int(req.matches[2], "version");
            send_json(res, 200, segmentation_to_json(store_->get_segmentation(req.matches[1], v)));
          }));

  svr.Post(R"(/series/([^/]+)/segmentations/([^/]+)/edits)",
           guard([this](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             const std::int64_t base = parse_int(req.matches[2], "version");
             const json body = parse_body(req);
             if (auto expected = optional_field<std::int64_t>(body, "expected_latest_version")) {
               const std::int64_t latest = store_->latest_version(id);
               if (latest != *expected) {
                 throw ConflictError("segmentation has newer versions",
                                     "latest is " + std::to_string(latest));
               }
             }
             SegmentationSet set = store_->get_segmentation(id, base);
             if (!body.contains("ops") || !body["ops"].is_array()) {
               throw ArgumentError("edits need an ops array");
             }
             json changed = json::object();
             for (const auto& op : body["ops"]) {
               const std::string roi = field<std::string>(op, {"roi"});
               const Brush brush = brush_from_json(op);
               RoiMask* target = nullptr;
               for (auto& r : set.rois) {
                 if (r.roi.name == roi) target = &r;
               }
               if (!target) {
                 // Painting into a missing ROI creates it.
                 int number = 1;
                 for (const auto& r : set.rois) number = std::max(number, r.roi.number + 1);
                 set.rois.push_back({Roi{number, roi, palette_color(set.rois.size())},
                                     VoxelMask(set.grid)});
                 target = &set.rois.back();
               }
               const std::int64_t before = target->mask.popcount();
               target->mask = apply_brush(target->mask, brush);
               const std::int64_t delta = target->mask.popcount() - before;
               changed[roi] = changed.value(roi, std::int64_t{0}) + delta;
             }
             set.parent_version = base;
             set.provenance = {};
             set.provenance.source = ProvenanceSource::Edited;
             set.provenance.edited_from = base;
             const std::int64_t v = store_->put_segmentation(id, set);
             send_json(res, 201,
                       {{"series_id", id}, {"version", v}, {"parent_version", base},
                        {"voxel_delta", changed}});
           }));

  // Evaluation ----------------------------------------------------------------

  svr.Post("/evaluate", guard([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const std::string id = field<std::string>(body, {"series_id", "series"});
    const auto pv = field<std::int64_t>(body, {"pred_version"});
    const auto gv = field<std::int64_t>(body, {"gt_version"});
    const Evaluation ev = evaluate(store_->get_segmentation(id, pv), store_->get_segmentation(id, gv));
    const std::int64_t dv = store_->put_segmentation(id, ev.discrepancies);
    const std::string report_id = store_->put_report(ev.report, dv);
    send_json(res, 200,
              {{"report_id", report_id}, {"discrepancy_version", dv}, {"report", report_to_json(ev.report)}});
  }));

  // Models and jobs -----------------------------------------------------------

  svr.Get("/models", guard([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& m : registry_->list()) out.push_back(manifest_public_json(m));
    send_json(res, 200, out);
  }));

  svr.Post("/models", guard([this](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    if (body.is_object()) body.erase("model_id");
    ModelManifest m;
    try {
      m = manifest_from_json(body);
    } catch (const ParseError& e) {
      throw ArgumentError(e.what(), e.detail());
    }
    send_json(res, 201, manifest_public_json(registry_->register_model(std::move(m))));
  }));

  svr.Post("/jobs", guard([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    std::string key = req.get_header_value("Idempotency-Key");
    if (key.empty()) key = body.value("idempotency_key", std::string{});
    const InferenceJob job = orchestrator_->submit(field<std::string>(body, {"model_id"}),
                                                   field<std::string>(body, {"series_id", "series"}), key);
    send_json(res, 202, job_to_json(job));
  }));

  svr.Get("/jobs", guard([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& j : orchestrator_->jobs()) out.push_back(job_to_json(j));
    send_json(res, 200, out);
  }));

  svr.Get(R"(/jobs/([^/]+))", guard([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, job_to_json(orchestrator_->status(req.matches[1])));
  }));

  // Export --------------------------------------------------------------------

  svr.Post("/export", guard([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    ExportRequest r;
    r.series_id = field<std::string>(body, {"series_id", "series"});
    r.pred_version = field<std::int64_t>(body, {"pred_version"});
    r.corrected_version = field<std::int64_t>(body, {"corrected_version"});
    r.gt_version = optional_field<std::int64_t>(body, "gt_version");
    r.include_images = body.value("include_images", false);
    const ExportBundle b = export_bundle(*store_, r);
    res.status = 200;
    res.set_header("Content-Disposition",
                   "attachment; filename=\"bundle-v" + std::to_string(r.pred_version) + "-v" +
                       std::to_string(r.corrected_version) + ".tar\"");
    res.set_content(std::string(b.archive.begin(), b.archive.end()), "application/x-tar");
  }));
}

Service::~Service() { stop(); }

void Service::start() {
  auto& svr = impl_->server;
  port_ = config_.port == 0 ? svr.bind_to_any_port(config_.host)
                            : (svr.bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (port_ < 0) {
    throw StartupError("cannot bind listen address",
                       config_.host + ":" + std::to_string(config_.port));
  }
  impl_->started = true;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  svr.wait_until_ready();
  spdlog::info("{} {} listening on {}:{}", kServiceName, kServiceVersion, config_.host, port_);
}

void Service::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

void Service::stop() {
  {
    std::lock_guard lock(impl_->mutex);
    if (impl_->stopped) return;
    impl_->stopped = true;
  }
  if (impl_->started) {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
  }
  if (orchestrator_) orchestrator_->shutdown();
  impl_->stopped_cv.notify_all();
}

}  // namespace segstudio
