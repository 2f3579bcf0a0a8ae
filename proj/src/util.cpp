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

#include "segstudio/util.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>

#include <fcntl.h>
#include <unistd.h>

#include <openssl/evp.h>

#include "segstudio/errors.hpp"

namespace segstudio {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Argument: return "invalid_argument";
    case ErrorCode::Bounds: return "out_of_bounds";
    case ErrorCode::Codec: return "codec_error";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::Geometry: return "geometry_error";
    case ErrorCode::MixedSeries: return "mixed_series";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::GridMismatch: return "grid_mismatch";
    case ErrorCode::SeriesMismatch: return "series_mismatch";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::Busy: return "busy";
    case ErrorCode::Integrity: return "integrity_error";
    case ErrorCode::Unauthorized: return "unauthorized";
    case ErrorCode::PayloadTooLarge: return "payload_too_large";
    case ErrorCode::Startup: return "startup_error";
    case ErrorCode::Executor: return "executor_error";
    case ErrorCode::Internal: return "internal_error";
  }
  return "internal_error";
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Internal, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int n = 0; n < len; ++n) {
    out.push_back(kHex[digest[n] >> 4]);
    out.push_back(kHex[digest[n] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::int64_t now_us() {
  static std::atomic<std::int64_t> last{0};
  const std::int64_t wall = std::chrono::duration_cast<std::chrono::microseconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
  std::int64_t prev = last.load();
  std::int64_t next;
  do {
    next = wall > prev ? wall : prev + 1;
  } while (!last.compare_exchange_weak(prev, next));
  return next;
}

std::string format_timestamp(std::int64_t us) {
  const std::time_t secs = static_cast<std::time_t>(us / 1'000'000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(us % 1'000'000));
  return buf;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open file", path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(rng());
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::Internal, "cannot create file", tmp.string());
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      ::close(fd);
      std::filesystem::remove(tmp);
      throw Error(ErrorCode::Internal, "write failed", tmp.string());
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::filesystem::rename(tmp, path);
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  write_file_atomic(path,
                    std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

}  // namespace segstudio
