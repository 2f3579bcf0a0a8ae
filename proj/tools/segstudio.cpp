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

// segstudio command line: the HTTP service plus offline helpers.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <pthread.h>

#include "segstudio/analysis.hpp"
#include "segstudio/api.hpp"
#include "segstudio/contour.hpp"
#include "segstudio/dicom.hpp"
#include "segstudio/exchange.hpp"
#include "segstudio/orchestrator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace segstudio;

namespace {

json read_json(const fs::path& path) {
  const Bytes raw = read_file(path);
  try {
    return json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON", path.string() + ": " + e.what());
  }
}

void emit(const json& doc, const std::string& out) {
  const std::string text = doc.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

std::vector<Bytes> read_dicom_dir(const fs::path& dir) {
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".dcm") paths.push_back(e.path());
  }
  if (paths.empty()) throw NotFoundError("no .dcm files in directory", dir.string());
  std::sort(paths.begin(), paths.end());
  std::vector<Bytes> files;
  files.reserve(paths.size());
  for (const auto& p : paths) files.push_back(read_file(p));
  return files;
}

int run_serve(ApiConfig config) {
  // Block the stop signals before any thread exists so that only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(std::move(config));
  service.start();
  std::cerr << "listening on " << service.config().host << ":" << service.port() << "\n";

  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "signal " << sig << ", shutting down\n";
  service.stop();
  return 0;
}

int run_phantom(const std::string& out_dir, const std::string& spec_path, const std::string& suffix) {
  const PhantomSpec spec =
      spec_path.empty() ? sphere_phantom_spec(suffix) : phantom_spec_from_json(read_json(spec_path));
  const Phantom p = generate_phantom(spec);
  fs::create_directories(out_dir);
  for (std::size_t n = 0; n < p.files.size(); ++n) {
    char name[32];
    std::snprintf(name, sizeof(name), "slice_%04zu.dcm", n);
    write_file_atomic(fs::path(out_dir) / name, p.files[n]);
  }
  write_file_atomic(fs::path(out_dir) / "manifest.json", p.manifest.dump(2) + "\n");
  std::cout << p.rendering.series_id << " " << p.files.size() << " slices\n";
  return 0;
}

int run_rasterize(const std::string& structures, const std::string& grid_path,
                  const std::string& series_dir, const std::string& out) {
  Grid grid;
  std::string series_id;
  if (!series_dir.empty()) {
    const ImageSeries img = parse_series(read_dicom_dir(series_dir));
    grid = img.grid;
    series_id = img.series_id;
  } else {
    grid = grid_from_json(read_json(grid_path));
  }
  const ContourSet contours = parse_structure_set(read_json(structures));
  SegmentationSet set = rasterize_contours(contours, grid);
  if (set.series_ref.empty()) set.series_ref = series_id;
  emit(segmentation_to_json(set), out);
  return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& gt_path, const std::string& out,
                 const std::string& discrepancy_out) {
  const SegmentationSet pred = segmentation_from_json(read_json(pred_path));
  const SegmentationSet gt = segmentation_from_json(read_json(gt_path));
  const Evaluation ev = evaluate(pred, gt);
  emit(report_to_json(ev.report), out);
  if (!discrepancy_out.empty()) emit(segmentation_to_json(ev.discrepancies), discrepancy_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segstudio: segmentation studio service and tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kServiceVersion));

  ApiConfig config;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", config.host, "Listen address")->envname("SEGSTUDIO_HOST")->capture_default_str();
  serve->add_option("--port", config.port, "Listen port, 0 for any free port")
      ->envname("SEGSTUDIO_PORT")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->add_option("--data-dir", config.data_dir, "Store directory")
      ->envname("SEGSTUDIO_DATA_DIR")
      ->capture_default_str();
  serve->add_option("--executor", config.executor, "Executor kind")
      ->envname("SEGSTUDIO_EXECUTOR")
      ->check(CLI::IsMember({"local", "mock"}))
      ->capture_default_str();
  serve->add_option("--max-jobs", config.max_jobs, "Executors, i.e. jobs running at once")
      ->envname("SEGSTUDIO_MAX_JOBS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_option("--queue-limit", config.queue_limit, "Queued jobs before 503")
      ->envname("SEGSTUDIO_QUEUE_LIMIT")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_option("--token", config.token, "Bearer token; empty disables auth")
      ->envname("SEGSTUDIO_TOKEN");
  serve->add_option("--max-upload-mb", config.max_upload_mb, "Request body limit in MB")
      ->envname("SEGSTUDIO_MAX_UPLOAD_MB")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  serve->add_option("--local-command", config.local_command,
                    "Command template for non-builtin model images "
                    "({workspace} {input} {output} {image})")
      ->envname("SEGSTUDIO_LOCAL_COMMAND");
  serve->add_option("--salt", config.pseudonym_salt, "Patient pseudonym salt")
      ->envname("SEGSTUDIO_SALT");
  serve->add_option("--log-level", config.log_level, "trace|debug|info|warn|error|off")
      ->envname("SEGSTUDIO_LOG_LEVEL")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
      ->capture_default_str();

  std::string phantom_out, phantom_spec, phantom_suffix = "1";
  auto* phantom = app.add_subcommand("phantom", "Write a synthetic DICOM series and its manifest");
  phantom->add_option("--out", phantom_out, "Output directory")->required();
  phantom->add_option("--spec", phantom_spec, "Phantom spec JSON; default is the sphere phantom")
      ->check(CLI::ExistingFile);
  phantom->add_option("--suffix", phantom_suffix, "Series UID suffix for the default phantom")
      ->capture_default_str();

  std::string rs_structures, rs_grid, rs_series, rs_out;
  auto* rasterize = app.add_subcommand("rasterize", "Structure set JSON to segmentation document");
  rasterize->add_option("--structures", rs_structures, "Structure set JSON")
      ->required()
      ->check(CLI::ExistingFile);
  auto* grid_opt = rasterize->add_option("--grid", rs_grid, "Grid JSON")->check(CLI::ExistingFile);
  auto* series_opt =
      rasterize->add_option("--series", rs_series, "DICOM series directory")->check(CLI::ExistingDirectory);
  grid_opt->excludes(series_opt);
  rasterize->add_option("--out", rs_out, "Output file, default stdout");

  std::string ev_pred, ev_gt, ev_out, ev_disc;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare two segmentation documents");
  evaluate_cmd->add_option("--pred", ev_pred, "Predicted segmentation")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--gt", ev_gt, "Reference segmentation")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--out", ev_out, "Report file, default stdout");
  evaluate_cmd->add_option("--discrepancy", ev_disc, "Write the discrepancy segmentation here");

  std::string workspace;
  auto* refmodel = app.add_subcommand("reference-model", "Run the threshold model on a staged workspace");
  refmodel->add_option("--workspace", workspace, "Workspace with input/ staged")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return run_serve(config);
    if (*phantom) return run_phantom(phantom_out, phantom_spec, phantom_suffix);
    if (*rasterize) {
      if (rs_grid.empty() && rs_series.empty()) throw ArgumentError("one of --grid or --series is required");
      return run_rasterize(rs_structures, rs_grid, rs_series, rs_out);
    }
    if (*evaluate_cmd) return run_evaluate(ev_pred, ev_gt, ev_out, ev_disc);
    if (*refmodel) {
      run_threshold_in_workspace(workspace);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what();
    if (!e.detail().empty()) std::cerr << " (" << e.detail() << ")";
    std::cerr << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
