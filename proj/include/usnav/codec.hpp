#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "usnav/calibration.hpp"
#include "usnav/tracking.hpp"

namespace usnav {

// Frame packet, little-endian:
//   0  magic "USNV"         4
//   4  version u8           1
//   5  frame_id u64         8
//  13  capture_ts_us u64    8
//  21  u_min,u_max,v_min,v_max u16 x4
//  29  probe_tag            8 (NUL padded)
//  37  payload_len u32      4
//  41  payload: crop pixels (w*h bytes, row-major) then RLE mask:
//        run_count u32, run_count x u32 lengths; runs alternate starting
//        with an invalid run (which may be 0) and sum to w*h.
inline constexpr std::array<char, 4> kFrameMagic{'U', 'S', 'N', 'V'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 41;
inline constexpr std::size_t kProbeTagSize = 8;

struct FramePacket {
  std::uint8_t version = kFrameVersion;
  std::uint64_t frame_id = 0;
  std::uint64_t capture_timestamp_us = 0;
  BoundingBox bounds;
  std::string probe_tag;  // at most 8 bytes, no NUL
  GrayImage crop;         // bounds.width() x bounds.height()
  ImageMask mask;         // same dimensions as crop

  friend bool operator==(const FramePacket& a, const FramePacket& b);
};

FramePacket make_frame_packet(const PackagedFrame& frame, std::uint64_t frame_id,
                              std::uint64_t capture_timestamp_us);

std::vector<std::uint8_t> encode_frame(const FramePacket& packet);
// Throws MalformedPacket carrying the offset of the first violation.
FramePacket decode_frame(std::span<const std::uint8_t> bytes);

// Alternating run lengths, first run counts invalid pixels.
std::vector<std::uint32_t> mask_runs(const ImageMask& mask);

// Tracking packet, 75 bytes little-endian:
//   0  magic "USTK"  4
//   4  version u8    1
//   5  tool_id u8    1
//   6  timestamp_us u64  8
//  14  quaternion w,x,y,z f64 x4  32
//  46  translation x,y,z f64 x3 (mm)  24
//  70  rms_error f32 (mm)  4
//  74  occluded_count u8  1
inline constexpr std::array<char, 4> kTrackingMagic{'U', 'S', 'T', 'K'};
inline constexpr std::uint8_t kTrackingVersion = 1;
inline constexpr std::size_t kTrackingPacketSize = 75;

struct TrackingPacket {
  std::uint8_t version = kTrackingVersion;
  std::uint8_t tool_id = 0;
  std::uint64_t timestamp_us = 0;
  std::array<double, 4> quaternion{1.0, 0.0, 0.0, 0.0};  // w, x, y, z
  std::array<double, 3> translation{0.0, 0.0, 0.0};
  float rms_error = 0.0f;
  std::uint8_t occluded_count = 0;

  friend bool operator==(const TrackingPacket&, const TrackingPacket&) = default;

  RigidTransform pose() const {
    return RigidTransform::from_quaternion(
        quaternion, Vec3(translation[0], translation[1], translation[2]));
  }
};

TrackingPacket make_tracking_packet(const ToolPose& pose, std::uint64_t timestamp_us);

std::array<std::uint8_t, kTrackingPacketSize> encode_tracking(const TrackingPacket& packet);
// Throws MalformedPacket or Error(kNonUnitQuaternion).
TrackingPacket decode_tracking(std::span<const std::uint8_t> bytes);

}  // namespace usnav
