#include <gtest/gtest.h>

#include <cstring>

#include "support.hpp"
#include "usnav/codec.hpp"
#include "usnav/sim.hpp"

using namespace usnav;
using namespace usnav::testing;

namespace {

constexpr int kFuzzCases = 10000;

TrackingPacket random_tracking(Rng& rng) {
  TrackingPacket p;
  p.tool_id = static_cast<std::uint8_t>(rng());
  p.timestamp_us = rng();
  const RigidTransform t = random_pose(rng, 1000.0);
  p.quaternion = t.quaternion();
  p.translation = {t.translation().x(), t.translation().y(), t.translation().z()};
  p.rms_error = static_cast<float>(uniform(rng, 0, 5));
  p.occluded_count = static_cast<std::uint8_t>(rng() % 3);
  return p;
}

FramePacket random_frame(Rng& rng) {
  FramePacket p;
  p.frame_id = rng();
  p.capture_timestamp_us = rng();
  const int w = 1 + static_cast<int>(rng() % 24), h = 1 + static_cast<int>(rng() % 24);
  p.bounds.u_min = static_cast<int>(rng() % 1000);
  p.bounds.v_min = static_cast<int>(rng() % 1000);
  p.bounds.u_max = p.bounds.u_min + w - 1;
  p.bounds.v_max = p.bounds.v_min + h - 1;
  const std::string alphabet = "ABCXYZ0189-";
  for (std::size_t i = rng() % 9; i > 0; --i) p.probe_tag += alphabet[rng() % alphabet.size()];
  p.crop.width = w;
  p.crop.height = h;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  // Blocky masks give realistic runs; every few cases is all-valid or all-invalid.
  const int mode = static_cast<int>(rng() % 5);
  for (auto& b : bits) b = mode == 0 ? 1 : mode == 1 ? 0 : (rng() % 7 != 0);
  for (std::size_t i = 0; i < bits.size(); ++i) p.crop.pixels.push_back(bits[i] ? static_cast<std::uint8_t>(rng()) : 0);
  p.mask = ImageMask(w, h, std::move(bits));
  return p;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));  // host is little-endian
  out.insert(out.end(), raw, raw + sizeof(T));
}

}  // namespace

TEST(TrackingCodec, LayoutMatchesHandAssembledBytes) {
  TrackingPacket p;
  p.tool_id = 7;
  p.timestamp_us = 0x0102030405060708ull;
  p.quaternion = {0.5, -0.5, 0.5, -0.5};
  p.translation = {1.25, -2.5, 1000.0};
  p.rms_error = 0.75f;
  p.occluded_count = 1;
  std::vector<std::uint8_t> expected{'U', 'S', 'T', 'K', 1, 7};
  put_le(expected, p.timestamp_us);
  for (double q : p.quaternion) put_le(expected, q);
  for (double t : p.translation) put_le(expected, t);
  put_le(expected, 0.75f);
  expected.push_back(1);
  ASSERT_EQ(expected.size(), kTrackingPacketSize);
  const auto bytes = encode_tracking(p);
  EXPECT_TRUE(std::equal(bytes.begin(), bytes.end(), expected.begin()));
}

TEST(TrackingCodec, FuzzRoundTripIsBitwise) {
  Rng rng(1);
  for (int i = 0; i < kFuzzCases; ++i) {
    const TrackingPacket p = random_tracking(rng);
    const auto bytes = encode_tracking(p);
    const TrackingPacket back = decode_tracking(bytes);
    ASSERT_EQ(back, p);
    ASSERT_EQ(encode_tracking(back), bytes);
  }
}

TEST(TrackingCodec, RejectsMalformedInput) {
  Rng rng(2);
  const auto good = encode_tracking(random_tracking(rng));
  auto offset_of = [](std::span<const std::uint8_t> b) -> long {
    try {
      decode_tracking(b);
    } catch (const MalformedPacket& e) {
      return static_cast<long>(e.offset());
    }
    return -1;
  };
  auto bad = good;
  bad[2] = 'X';
  EXPECT_EQ(offset_of(bad), 2);
  bad = good;
  bad[4] = 9;
  EXPECT_EQ(offset_of(bad), 4);
  EXPECT_EQ(offset_of(std::span(good).first(40)), 40);
  std::vector<std::uint8_t> longer(good.begin(), good.end());
  longer.push_back(0);
  EXPECT_EQ(offset_of(longer), 75);

  TrackingPacket p = random_tracking(rng);
  p.quaternion = {1.0, 1.0, 0.0, 0.0};
  try {
    decode_tracking(encode_tracking(p));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonUnitQuaternion);
  }
  p.quaternion = {1.0, 0.0, 0.0, 0.0};
  p.translation[1] = std::nan("");
  EXPECT_THROW(decode_tracking(encode_tracking(p)), MalformedPacket);
}

TEST(FrameCodec, FuzzRoundTripIsBitwise) {
  Rng rng(3);
  for (int i = 0; i < kFuzzCases; ++i) {
    const FramePacket p = random_frame(rng);
    const std::vector<std::uint8_t> bytes = encode_frame(p);
    const FramePacket back = decode_frame(bytes);
    ASSERT_TRUE(back == p) << "case " << i;
    ASSERT_EQ(encode_frame(back), bytes);
  }
}

TEST(FrameCodec, MaskRunsAlternateAndStartInvalid) {
  const ImageMask m(5, 1, {1, 1, 0, 1, 0});
  EXPECT_EQ(mask_runs(m), (std::vector<std::uint32_t>{0, 2, 1, 1, 1}));
  EXPECT_EQ(mask_runs(ImageMask::filled(3, 2, false)), (std::vector<std::uint32_t>{6}));
}

TEST(FrameCodec, HeaderFieldsSitAtDocumentedOffsets) {
  Rng rng(4);
  FramePacket p = random_frame(rng);
  p.probe_tag = "SC5-1U";
  const std::vector<std::uint8_t> b = encode_frame(p);
  auto u16 = [&](std::size_t at) { return b[at] | b[at + 1] << 8; };
  std::uint64_t id = 0;
  std::memcpy(&id, &b[5], 8);
  EXPECT_EQ(id, p.frame_id);
  EXPECT_EQ(u16(21), p.bounds.u_min);
  EXPECT_EQ(u16(27), p.bounds.v_max);
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(&b[29])), "SC5-1U");
  std::uint32_t payload = 0;
  std::memcpy(&payload, &b[37], 4);
  EXPECT_EQ(payload + kFrameHeaderSize, b.size());
  EXPECT_EQ(payload, p.crop.pixels.size() + 4 + 4 * mask_runs(p.mask).size());
}

TEST(FrameCodec, CorruptionNeverEscapesAsAnythingButErrors) {
  Rng rng(5);
  int rejected = 0;
  for (int i = 0; i < kFuzzCases; ++i) {
    std::vector<std::uint8_t> b = encode_frame(random_frame(rng));
    switch (rng() % 3) {
      case 0: b[rng() % b.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
      case 1: b.resize(rng() % b.size()); break;
      default: b.insert(b.begin() + static_cast<long>(rng() % b.size()), static_cast<std::uint8_t>(rng())); break;
    }
    try {
      decode_frame(b);
    } catch (const MalformedPacket& e) {
      EXPECT_LE(e.offset(), b.size());
      ++rejected;
    }
  }
  // Pixel-byte flips decode fine; everything structural must be caught.
  EXPECT_GT(rejected, kFuzzCases / 2);
}

TEST(FrameCodec, SpecificViolationsReportTheirOffset) {
  Rng rng(6);
  FramePacket p = random_frame(rng);
  const std::vector<std::uint8_t> good = encode_frame(p);
  auto offset_of = [](const std::vector<std::uint8_t>& b) -> long {
    try {
      decode_frame(b);
    } catch (const MalformedPacket& e) {
      return static_cast<long>(e.offset());
    }
    return -1;
  };
  std::vector<std::uint8_t> b = good;
  b[0] = 'X';
  EXPECT_EQ(offset_of(b), 0);
  b = good;
  b[4] = 2;
  EXPECT_EQ(offset_of(b), 4);
  b = good;
  b.resize(20);
  EXPECT_EQ(offset_of(b), 20);
  b = good;
  b.push_back(0);
  EXPECT_EQ(offset_of(b), static_cast<long>(good.size()));
  // Inverted bounds.
  b = good;
  std::swap(b[21], b[23]);
  std::swap(b[22], b[24]);
  if (p.bounds.u_min != p.bounds.u_max) EXPECT_EQ(offset_of(b), 21);
}

TEST(FrameCodec, EncoderRejectsInconsistentPackets) {
  Rng rng(7);
  FramePacket p = random_frame(rng);
  p.probe_tag = "TOO-LONG-TAG";
  EXPECT_THROW(encode_frame(p), Error);
  p = random_frame(rng);
  p.bounds.u_max += 1;
  EXPECT_THROW(encode_frame(p), Error);
}

TEST(FrameCodec, FullSizeFrameSizeFollowsLayout) {
  const SyntheticUltrasound us = synthetic_ultrasound(default_fan(), 1);
  const ProbeGeometry g = compute_probe_geometry(us.mask, ProbeKind::kConvex, 60.0, "SC5-1U");
  const FramePacket p = make_frame_packet(package_frame(us.image, us.mask, g), 1, 2);
  const std::size_t expected = kFrameHeaderSize + p.crop.pixels.size() + 4 + 4 * mask_runs(p.mask).size();
  EXPECT_EQ(encode_frame(p).size(), expected);
  EXPECT_TRUE(decode_frame(encode_frame(p)) == p);
}
