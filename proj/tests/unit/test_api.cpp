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

#include <doctest.h>

// Eigen must precede httplib: <resolv.h> defines a _res macro.
#include "segstudio/api.hpp"
#include "segstudio/bundle.hpp"
#include "segstudio/dicom.hpp"
#include "segstudio/exchange.hpp"
#include "../http_helpers.hpp"

using namespace segstudio;
using testhttp::Client;
using testhttp::TempDir;
using nlohmann::json;

namespace {

ApiConfig config_for(const TempDir& dir, std::string token = {}) {
  ApiConfig c;
  c.port = 0;
  c.data_dir = dir.path / "data";
  c.executor = "mock";
  c.token = std::move(token);
  c.log_level = "warn";
  return c;
}

json threshold_manifest(const std::string& name = "sphere-threshold") {
  return {{"name", name},
          {"version", "1.0"},
          {"image", "builtin:threshold"},
          {"label_map", {{"sphere", 1}}},
          {"params", {{"threshold", 500}}}};
}

}  // namespace

TEST_CASE("health, auth and error bodies") {
  TempDir dir;
  Service svc(config_for(dir, "s3cret"));
  svc.start();
  Client anon(svc.port());
  Client auth(svc.port(), "s3cret");

  const auto health = anon.get("/health");
  CHECK(health.status == 200);
  CHECK(health.doc()["service"] == "segstudio");
  CHECK(health.doc()["version"] == std::string(kServiceVersion));

  const auto denied = anon.get("/studies");
  CHECK(denied.status == 401);
  CHECK(denied.doc()["code"] == "unauthorized");
  CHECK(denied.doc().contains("message"));
  CHECK(denied.doc().contains("detail"));
  CHECK(Client(svc.port(), "wrong").get("/studies").status == 401);
  CHECK(auth.get("/studies").status == 200);

  const auto missing = auth.get("/series/1.2.3");
  CHECK(missing.status == 404);
  CHECK(missing.doc()["code"] == "not_found");
  CHECK(auth.get("/nowhere").doc()["code"] == "not_found");
  CHECK(auth.post_raw("/models", "{not json", "application/json").doc()["code"] == "parse_error");
  CHECK(auth.post_raw("/studies", "hello", "text/plain").status == 415);
}

TEST_CASE("second service on the same port fails to start") {
  TempDir dir;
  Service a(config_for(dir));
  a.start();
  ApiConfig c = config_for(dir);
  c.data_dir = dir.path / "other";
  c.port = a.port();
  Service b(c);
  CHECK_THROWS_AS(b.start(), StartupError);
}

TEST_CASE("oversized uploads are rejected with 413") {
  TempDir dir;
  ApiConfig c = config_for(dir);
  c.max_upload_mb = 1;
  Service svc(c);
  svc.start();
  Client cli(svc.port());
  const auto r = cli.post_raw("/studies", std::string(2 * 1024 * 1024, 'x'), "application/dicom");
  CHECK(r.status == 413);
  CHECK(r.doc()["code"] == "payload_too_large");
}

TEST_CASE("study upload, slices, segmentations, edits, evaluation") {
  TempDir dir;
  Service svc(config_for(dir));
  svc.start();
  Client cli(svc.port());
  const Phantom p = generate_phantom(sphere_phantom_spec("7"));
  const std::string sid = p.rendering.series_id;

  const auto up = cli.upload(p.files);
  REQUIRE(up.status == 201);
  CHECK(up.doc()["series_id"] == sid);
  CHECK(up.doc()["patient_pseudonym"].get<std::string>().rfind("anon-", 0) == 0);
  CHECK(up.body.find("PHANTOM") == std::string::npos);
  CHECK(cli.upload(p.files).status == 201);  // identical re-upload is idempotent

  const auto studies = cli.get("/studies").doc();
  REQUIRE(studies.size() == 1);
  CHECK(studies[0]["series"].size() == 1);

  const auto slice = cli.get("/series/" + sid + "/slices/16");
  REQUIRE(slice.status == 200);
  CHECK(slice.body.size() == 32 * 32 * 2);
  const std::size_t centre = (16 * 32 + 16) * 2;
  CHECK(static_cast<std::uint8_t>(slice.body[centre]) + 256 * static_cast<std::uint8_t>(slice.body[centre + 1]) == 1000);
  CHECK(cli.get("/series/" + sid + "/slices/32").status == 400);

  // Exchange document round trip is bit-exact.
  json doc = segmentation_to_json(p.ground_truth);
  const auto put = cli.post("/series/" + sid + "/segmentations", doc);
  REQUIRE(put.status == 201);
  CHECK(put.doc()["version"] == 1);
  const json back = cli.get("/series/" + sid + "/segmentations/1").doc();
  CHECK(back["rois"] == doc["rois"]);
  CHECK(back["grid"] == doc["grid"]);
  CHECK(back["version"] == 1);

  json wrong_grid = doc;
  wrong_grid["grid"]["cols"] = 31;
  wrong_grid["rois"] = json::array();
  CHECK(cli.post("/series/" + sid + "/segmentations", wrong_grid).doc()["code"] == "grid_mismatch");

  // Erase a unit-radius sphere at the centre: 7 voxels.
  const json edit = {{"ops", {{{"roi", "sphere"}, {"center", {16, 16, 16}}, {"radius", 1.0}, {"mode", "erase"}}}},
                     {"expected_latest_version", 1}};
  const auto e = cli.post("/series/" + sid + "/segmentations/1/edits", edit);
  REQUIRE(e.status == 201);
  CHECK(e.doc()["version"] == 2);
  CHECK(e.doc()["voxel_delta"]["sphere"] == -7);
  CHECK(cli.post("/series/" + sid + "/segmentations/1/edits", edit).status == 409);

  const auto lineage = cli.get("/series/" + sid + "/segmentations").doc();
  REQUIRE(lineage.size() == 2);
  CHECK(lineage[1]["parent_version"] == 1);
  CHECK(lineage[1]["provenance"]["source"] == "edited");

  const auto ev = cli.post("/evaluate", {{"series_id", sid}, {"pred_version", 2}, {"gt_version", 1}});
  REQUIRE(ev.status == 200);
  const json report = ev.doc()["report"];
  CHECK(report["mean_dice"].get<double>() == doctest::Approx(2.0 * 2102 / (2102 + 2109)).epsilon(1e-12));
  const std::int64_t dv = ev.doc()["discrepancy_version"];
  const json disc = cli.get("/series/" + sid + "/segmentations/" + std::to_string(dv)).doc();
  CHECK(disc["rois"][0]["name"] == "sphere-discrepancy");
  CHECK(disc["provenance"]["source"] == "derived");
  CHECK(rle_decode(disc["rois"][0]["rle"].get<RleRuns>(), p.rendering.grid).popcount() == 7);

  const json info = cli.get("/series/" + sid).doc();
  CHECK(info["segmentations"].size() == 3);
  CHECK(info["reports"].size() == 1);
}

TEST_CASE("models, jobs, export and purge over HTTP") {
  TempDir dir;
  Service svc(config_for(dir));
  svc.start();
  Client cli(svc.port());
  const Phantom p = generate_phantom(sphere_phantom_spec("8"));
  const std::string sid = p.rendering.series_id;
  REQUIRE(cli.upload(p.files).status == 201);

  const auto reg = cli.post("/models", threshold_manifest());
  REQUIRE(reg.status == 201);
  const std::string model_id = reg.doc()["model_id"];
  CHECK(cli.post("/models", threshold_manifest()).status == 409);
  json bad = threshold_manifest("other");
  bad["label_map"] = json::object();
  CHECK(cli.post("/models", bad).status == 400);
  CHECK(cli.get("/models").doc().size() == 1);

  const httplib::Headers key{{"Idempotency-Key", "abc"}};
  const auto submitted = cli.post("/jobs", {{"model_id", model_id}, {"series_id", sid}}, key);
  REQUIRE(submitted.status == 202);
  const std::string job_id = submitted.doc()["job_id"];
  CHECK(cli.post("/jobs", {{"model_id", model_id}, {"series_id", sid}}, key).doc()["job_id"] == job_id);
  const json job = cli.wait_job(job_id);
  REQUIRE(job["state"] == "Completed");
  const std::int64_t pred = job["result_version"];
  CHECK(cli.post("/jobs", {{"model_id", "model-0099"}, {"series_id", sid}}).status == 404);

  for (const auto& e : cli.get("/executors").doc()) CHECK(e["state"] == "Suspended");

  const std::int64_t gt =
      cli.post("/series/" + sid + "/segmentations", segmentation_to_json(p.ground_truth)).doc()["version"];
  const auto exp = cli.post("/export", {{"series_id", sid}, {"pred_version", pred},
                                        {"corrected_version", pred}, {"gt_version", gt}});
  REQUIRE(exp.status == 200);
  const auto files = read_tar(std::span(reinterpret_cast<const std::uint8_t*>(exp.body.data()), exp.body.size()));
  REQUIRE_FALSE(files.empty());
  CHECK(files[0].name == "manifest.json");
  const json manifest = json::parse(files[0].data.begin(), files[0].data.end());
  CHECK(manifest["dice_before"] == 1.0);
  CHECK(manifest["dice_after"] == 1.0);
  for (const auto& f : files) CHECK(f.name.rfind("images/", 0) != 0);

  const auto purge = cli.del("/series/" + sid);
  REQUIRE(purge.status == 200);
  CHECK(purge.doc()["removed_blobs"].size() >= 2);
  CHECK(cli.get("/series/" + sid).status == 404);
  CHECK(cli.get("/series/" + sid + "/segmentations/" + std::to_string(pred)).status == 404);
  CHECK(cli.get("/series/" + sid + "/slices/0").status == 404);
  CHECK(cli.get("/studies").doc().empty());
}
