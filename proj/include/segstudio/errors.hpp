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

#include <stdexcept>
#include <string>
#include <string_view>

namespace segstudio {

/// Stable machine-readable error codes. The HTTP layer maps each one to a
/// status code and echoes the name in the `code` field of error bodies.
enum class ErrorCode {
  Argument,
  Bounds,
  Codec,
  Parse,
  Geometry,
  MixedSeries,
  Unsupported,
  GridMismatch,
  SeriesMismatch,
  NotFound,
  Conflict,
  Busy,
  Integrity,
  Unauthorized,
  PayloadTooLarge,
  Startup,
  Executor,
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string detail = {})
      : std::runtime_error(std::move(message)), code_(code), detail_(std::move(detail)) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

#define SEGSTUDIO_DEFINE_ERROR(Name, Code)                                  \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(std::string message, std::string detail = {})             \
        : Error(ErrorCode::Code, std::move(message), std::move(detail)) {}  \
  }

SEGSTUDIO_DEFINE_ERROR(ArgumentError, Argument);
SEGSTUDIO_DEFINE_ERROR(BoundsError, Bounds);
SEGSTUDIO_DEFINE_ERROR(CodecError, Codec);
SEGSTUDIO_DEFINE_ERROR(ParseError, Parse);
SEGSTUDIO_DEFINE_ERROR(GeometryError, Geometry);
SEGSTUDIO_DEFINE_ERROR(MixedSeriesError, MixedSeries);
SEGSTUDIO_DEFINE_ERROR(UnsupportedError, Unsupported);
SEGSTUDIO_DEFINE_ERROR(GridMismatchError, GridMismatch);
SEGSTUDIO_DEFINE_ERROR(SeriesMismatchError, SeriesMismatch);
SEGSTUDIO_DEFINE_ERROR(NotFoundError, NotFound);
SEGSTUDIO_DEFINE_ERROR(ConflictError, Conflict);
SEGSTUDIO_DEFINE_ERROR(BusyError, Busy);
SEGSTUDIO_DEFINE_ERROR(IntegrityError, Integrity);
SEGSTUDIO_DEFINE_ERROR(UnauthorizedError, Unauthorized);
SEGSTUDIO_DEFINE_ERROR(PayloadTooLargeError, PayloadTooLarge);
SEGSTUDIO_DEFINE_ERROR(StartupError, Startup);
SEGSTUDIO_DEFINE_ERROR(ExecutorError, Executor);

#undef SEGSTUDIO_DEFINE_ERROR

}  // namespace segstudio
