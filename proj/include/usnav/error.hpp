#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace usnav {

// Numeric values are mirrored by usnav_status in usnav.h; keep them in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kDegenerateProjection = 2,
  kRayParallelToPlane = 3,
  kSingularSystem = 4,
  kInvalidTool = 5,
  kInsufficientMarkers = 6,
  kDegenerateConfiguration = 7,
  kEmptyMask = 8,
  kDegenerateTopEdge = 9,
  kDimensionMismatch = 10,
  kMalformedPacket = 11,
  kNonUnitQuaternion = 12,
  kUnknownSession = 13,
  kUnknownTool = 14,
  kMalformedMessage = 15,
  kConfig = 16,
  kIo = 17,
  kTransport = 18,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Decoder failure carrying the byte offset of the first violation.
class MalformedPacket : public Error {
 public:
  MalformedPacket(std::size_t offset, const std::string& what)
      : Error(ErrorCode::kMalformedPacket,
              what + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace usnav
