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

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "segstudio/store.hpp"
#include "segstudio/util.hpp"

using namespace segstudio;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("segstudio-store-" + std::to_string(::getpid()) + "-" + std::to_string(now_us()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ImageSeries small_series(const std::string& id = "1.2.3.4") {
  ImageSeries s;
  s.study_id = "1.2.3";
  s.series_id = id;
  s.modality = "CT";
  s.patient_pseudonym = "anon-0000";
  s.grid.cols = 4;
  s.grid.rows = 3;
  s.grid.slices = 2;
  s.voxels.resize(24);
  for (std::size_t n = 0; n < s.voxels.size(); ++n) s.voxels[n] = static_cast<std::int16_t>(n * 100 - 1000);
  return s;
}

SegmentationSet seg_for(const ImageSeries& s, std::initializer_list<int> on) {
  SegmentationSet set;
  set.series_ref = s.series_id;
  set.grid = s.grid;
  VoxelMask m(s.grid);
  for (int n : on) m.set(n);
  set.rois.push_back({Roi{1, "organ", {255, 0, 0}}, std::move(m)});
  return set;
}

std::size_t blob_count(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& f : fs::directory_iterator(dir / "blobs")) n += f.is_regular_file();
  return n;
}

/// Runs `fn` in a child process that is expected to die inside the crash
/// hook at `point`.
void crash_at(const fs::path& dir, const std::string& point,
              const std::function<void(Store&)>& fn) {
  const pid_t pid = ::fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    StoreOptions o{dir, [&](std::string_view p) {
                     if (p == point) ::_exit(42);
                   }};
    Store store(o);
    fn(store);
    ::_exit(0);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 42);
}

}  // namespace

TEST_CASE("series round trip and idempotent re-put") {
  TempDir tmp;
  Store store({tmp.path, {}});
  const ImageSeries s = small_series();
  CHECK(store.put_series(s) == s.series_id);
  CHECK(store.get_series(s.series_id) == s);
  CHECK(store.put_series(s) == s.series_id);

  ImageSeries changed = s;
  changed.voxels[0] = 7;
  CHECK_THROWS_AS(store.put_series(changed), ConflictError);
  CHECK_THROWS_AS((void)store.get_series("nope"), NotFoundError);

  const auto studies = store.list_studies();
  REQUIRE(studies.size() == 1);
  CHECK(studies[0].series.size() == 1);
}

TEST_CASE("segmentation versions are append-only and survive reopen") {
  TempDir tmp;
  const ImageSeries s = small_series();
  {
    Store store({tmp.path, {}});
    store.put_series(s);
    CHECK(store.put_segmentation(s.series_id, seg_for(s, {1, 2})) == 1);
    SegmentationSet edit = seg_for(s, {1, 2, 3});
    edit.parent_version = 1;
    edit.provenance.source = ProvenanceSource::Edited;
    edit.provenance.edited_from = 1;
    CHECK(store.put_segmentation(s.series_id, edit) == 2);

    SegmentationSet bad_parent = seg_for(s, {});
    bad_parent.parent_version = 9;
    CHECK_THROWS_AS(store.put_segmentation(s.series_id, bad_parent), NotFoundError);

    SegmentationSet other_grid = seg_for(s, {});
    other_grid.grid.cols = 5;
    other_grid.rois[0].mask = VoxelMask(other_grid.grid);
    CHECK_THROWS_AS(store.put_segmentation(s.series_id, other_grid), GridMismatchError);

    SegmentationSet other_series = seg_for(s, {});
    other_series.series_ref = "9.9";
    CHECK_THROWS_AS(store.put_segmentation(s.series_id, other_series), SeriesMismatchError);
  }
  Store store({tmp.path, {}});
  const auto versions = store.list_versions(s.series_id);
  REQUIRE(versions.size() == 2);
  CHECK(versions[1].parent_version == 1);
  CHECK(versions[1].provenance.source == ProvenanceSource::Edited);
  const SegmentationSet v1 = store.get_segmentation(s.series_id, 1);
  CHECK(v1.version == 1);
  CHECK(v1.rois[0].mask.popcount() == 2);
  CHECK(store.get_segmentation(s.series_id, 2).rois[0].mask.popcount() == 3);
  CHECK(store.latest_version(s.series_id) == 2);
  CHECK(store.verify().ok);
}

TEST_CASE("identical mask content shares one blob") {
  TempDir tmp;
  Store store({tmp.path, {}});
  const ImageSeries s = small_series();
  store.put_series(s);
  store.put_segmentation(s.series_id, seg_for(s, {4}));
  const std::size_t before = blob_count(tmp.path);
  store.put_segmentation(s.series_id, seg_for(s, {4}));
  CHECK(blob_count(tmp.path) == before);
  CHECK(store.list_versions(s.series_id).size() == 2);
}

TEST_CASE("purge everything removes blobs and keeps version numbers unique") {
  TempDir tmp;
  const ImageSeries s = small_series();
  const ImageSeries keep = small_series("1.2.3.5");
  Store store({tmp.path, {}});
  store.put_series(s);
  store.put_series(keep);
  store.put_segmentation(s.series_id, seg_for(s, {1}));
  store.put_segmentation(s.series_id, seg_for(s, {2}));
  store.put_segmentation(keep.series_id, seg_for(keep, {1}));  // shares a blob with v1 of s

  fs::create_directories(store.workspace_root() / "job-1" / "input");
  std::ofstream(store.workspace_root() / "job-1" / ".series") << s.series_id;
  std::ofstream(store.workspace_root() / "job-1" / "input" / "volume.bin") << "xx";

  const PurgeReceipt receipt = store.purge_series(s.series_id, PurgeScope::Everything);
  CHECK(receipt.removed_blobs.size() == 3);
  CHECK(receipt.removed_workspace_files.size() == 2);
  CHECK(fs::is_empty(store.workspace_root() / "job-1"));
  CHECK_THROWS_AS((void)store.get_series(s.series_id), NotFoundError);
  CHECK(store.get_segmentation(keep.series_id, 1).rois[0].mask.popcount() == 1);
  // series blob and v2 blob are gone; the shared blob stays
  for (const auto& b : receipt.removed_blobs) {
    const bool shared = b == store.list_versions(keep.series_id)[0].blob;
    CHECK(fs::exists(tmp.path / "blobs" / b) == shared);
  }

  store.put_series(s);
  CHECK(store.put_segmentation(s.series_id, seg_for(s, {1})) == 3);
  CHECK(store.verify().ok);
}

TEST_CASE("purge compute copies leaves the store intact") {
  TempDir tmp;
  Store store({tmp.path, {}});
  const ImageSeries s = small_series();
  store.put_series(s);
  fs::create_directories(store.workspace_root() / "w");
  std::ofstream(store.workspace_root() / "w" / ".series") << s.series_id;
  const PurgeReceipt r = store.purge_series(s.series_id, PurgeScope::ComputeCopies);
  CHECK(r.removed_blobs.empty());
  CHECK(r.removed_workspace_files == std::vector<std::string>{"w/.series"});
  CHECK(store.get_series(s.series_id) == s);
}

TEST_CASE("torn tail is discarded, interior corruption is reported") {
  TempDir tmp;
  const ImageSeries s = small_series();
  {
    Store store({tmp.path, {}});
    store.put_series(s);
    store.put_segmentation(s.series_id, seg_for(s, {1}));
  }
  {
    std::ofstream log(tmp.path / "index.log", std::ios::app);
    log << "0123456789abcdef {\"op\":\"segm";
  }
  {
    Store store({tmp.path, {}});
    CHECK(store.latest_version(s.series_id) == 1);
  }
  {
    // Flip one byte inside the first record.
    std::fstream log(tmp.path / "index.log", std::ios::in | std::ios::out | std::ios::binary);
    log.seekp(25);
    log.put('#');
  }
  CHECK_THROWS_AS(Store({tmp.path, {}}), IntegrityError);
}

TEST_CASE("blob tampering is detected on read and by verify") {
  TempDir tmp;
  Store store({tmp.path, {}});
  const ImageSeries s = small_series();
  store.put_series(s);
  store.put_segmentation(s.series_id, seg_for(s, {1}));
  const std::string blob = store.list_versions(s.series_id)[0].blob;
  std::ofstream(tmp.path / "blobs" / blob, std::ios::app) << "x";
  CHECK_THROWS_AS((void)store.get_segmentation(s.series_id, 1), IntegrityError);
  CHECK_FALSE(store.verify().ok);
}

TEST_CASE("crash before commit leaves the previous state") {
  TempDir tmp;
  const ImageSeries s = small_series();
  {
    Store store({tmp.path, {}});
    store.put_series(s);
    store.put_segmentation(s.series_id, seg_for(s, {1}));
  }
  for (const char* point : {"blob-written", "index-partial"}) {
    CAPTURE(point);
    crash_at(tmp.path, point, [&](Store& st) { st.put_segmentation(s.series_id, seg_for(s, {5, 6})); });
    Store store({tmp.path, {}});
    CHECK(store.latest_version(s.series_id) == 1);
    CHECK(store.verify().ok);
    CHECK(blob_count(tmp.path) == 2);  // orphan swept
  }
  crash_at(tmp.path, "committed", [&](Store& st) { st.put_segmentation(s.series_id, seg_for(s, {5, 6})); });
  Store store({tmp.path, {}});
  CHECK(store.latest_version(s.series_id) == 2);
  CHECK(store.get_segmentation(s.series_id, 2).rois[0].mask.popcount() == 2);
}

TEST_CASE("concurrent writers get distinct versions") {
  TempDir tmp;
  Store store({tmp.path, {}});
  const ImageSeries s = small_series();
  store.put_series(s);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int n = 0; n < 5; ++n) store.put_segmentation(s.series_id, seg_for(s, {t, n + 4}));
    });
  }
  for (auto& t : threads) t.join();
  const auto versions = store.list_versions(s.series_id);
  REQUIRE(versions.size() == 20);
  for (std::size_t n = 0; n < versions.size(); ++n) CHECK(versions[n].version == std::int64_t(n + 1));
}

TEST_CASE("model and job records keep the latest value") {
  TempDir tmp;
  {
    Store store({tmp.path, {}});
    store.put_job_record("job-1", {{"state", "queued"}});
    store.put_job_record("job-1", {{"state", "running"}});
    store.put_model_record("model-0001", {{"name", "m"}});
  }
  Store store({tmp.path, {}});
  REQUIRE(store.job_records().size() == 1);
  CHECK(store.job_records()[0]["state"] == "running");
  CHECK(store.model_records().size() == 1);
}
