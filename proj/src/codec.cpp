#include "usnav/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace usnav {

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw MalformedPacket(in_.size(), std::string("truncated ") + what);
    }
  }
  template <typename T>
  T uint(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }
  double f64(const char* what) {
    const std::size_t at = pos_;
    const double v = std::bit_cast<double>(uint<std::uint64_t>(what));
    if (!std::isfinite(v)) throw MalformedPacket(at, std::string("non-finite ") + what);
    return v;
  }
  float f32(const char* what) {
    const std::size_t at = pos_;
    const float v = std::bit_cast<float>(uint<std::uint32_t>(what));
    if (!std::isfinite(v)) throw MalformedPacket(at, std::string("non-finite ") + what);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const std::array<char, 4>& magic) {
  const auto m = r.take(4, "magic");
  for (std::size_t i = 0; i < 4; ++i) {
    if (m[i] != static_cast<std::uint8_t>(magic[i])) {
      throw MalformedPacket(i, "bad magic");
    }
  }
}

}  // namespace

bool operator==(const FramePacket& a, const FramePacket& b) {
  return a.version == b.version && a.frame_id == b.frame_id &&
         a.capture_timestamp_us == b.capture_timestamp_us && a.bounds == b.bounds &&
         a.probe_tag == b.probe_tag && a.crop.width == b.crop.width &&
         a.crop.height == b.crop.height && a.crop.pixels == b.crop.pixels &&
         a.mask.width() == b.mask.width() && a.mask.height() == b.mask.height() &&
         a.mask.bits() == b.mask.bits();
}

FramePacket make_frame_packet(const PackagedFrame& frame, std::uint64_t frame_id,
                              std::uint64_t capture_timestamp_us) {
  FramePacket p;
  p.frame_id = frame_id;
  p.capture_timestamp_us = capture_timestamp_us;
  p.bounds = frame.bounds;
  p.probe_tag = frame.probe_tag.substr(0, kProbeTagSize);
  p.crop = frame.crop;
  p.mask = frame.mask;
  return p;
}

std::vector<std::uint32_t> mask_runs(const ImageMask& mask) {
  std::vector<std::uint32_t> runs;
  std::uint8_t current = 0;
  std::uint32_t length = 0;
  for (std::uint8_t b : mask.bits()) {
    if (b != current) {
      runs.push_back(length);
      current = b;
      length = 0;
    }
    ++length;
  }
  runs.push_back(length);
  return runs;
}

std::vector<std::uint8_t> encode_frame(const FramePacket& p) {
  const BoundingBox& b = p.bounds;
  const auto in_u16 = [](int v) { return v >= 0 && v <= 0xFFFF; };
  if (!in_u16(b.u_min) || !in_u16(b.u_max) || !in_u16(b.v_min) || !in_u16(b.v_max) ||
      b.u_min > b.u_max || b.v_min > b.v_max) {
    throw Error(ErrorCode::kInvalidArgument, "frame bounds out of range");
  }
  if (p.crop.width != b.width() || p.crop.height != b.height() ||
      p.crop.pixels.size() != static_cast<std::size_t>(b.width()) * b.height() ||
      p.mask.width() != b.width() || p.mask.height() != b.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "crop/mask do not match bounds");
  }
  if (p.probe_tag.size() > kProbeTagSize ||
      p.probe_tag.find('\0') != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "probe tag must be <= 8 bytes, no NUL");
  }

  const std::vector<std::uint32_t> runs = mask_runs(p.mask);
  const std::size_t payload = p.crop.pixels.size() + 4 + 4 * runs.size();
  if (payload > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "frame payload too large");
  }

  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + payload);
  Writer w(out);
  w.bytes(kFrameMagic.data(), 4);
  w.uint(p.version);
  w.uint(p.frame_id);
  w.uint(p.capture_timestamp_us);
  w.uint(static_cast<std::uint16_t>(b.u_min));
  w.uint(static_cast<std::uint16_t>(b.u_max));
  w.uint(static_cast<std::uint16_t>(b.v_min));
  w.uint(static_cast<std::uint16_t>(b.v_max));
  char tag[kProbeTagSize] = {};
  std::memcpy(tag, p.probe_tag.data(), p.probe_tag.size());
  w.bytes(tag, kProbeTagSize);
  w.uint(static_cast<std::uint32_t>(payload));
  w.bytes(p.crop.pixels.data(), p.crop.pixels.size());
  w.uint(static_cast<std::uint32_t>(runs.size()));
  for (std::uint32_t run : runs) w.uint(run);
  return out;
}

FramePacket decode_frame(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, kFrameMagic);
  FramePacket p;
  const std::size_t version_at = r.offset();
  p.version = r.uint<std::uint8_t>("version");
  if (p.version != kFrameVersion) throw MalformedPacket(version_at, "unsupported version");
  p.frame_id = r.uint<std::uint64_t>("frame_id");
  p.capture_timestamp_us = r.uint<std::uint64_t>("timestamp");
  const std::size_t bounds_at = r.offset();
  p.bounds.u_min = r.uint<std::uint16_t>("bounds");
  p.bounds.u_max = r.uint<std::uint16_t>("bounds");
  p.bounds.v_min = r.uint<std::uint16_t>("bounds");
  p.bounds.v_max = r.uint<std::uint16_t>("bounds");
  if (p.bounds.u_min > p.bounds.u_max || p.bounds.v_min > p.bounds.v_max) {
    throw MalformedPacket(bounds_at, "inverted bounds");
  }
  const auto tag = r.take(kProbeTagSize, "probe tag");
  std::size_t tag_len = 0;
  while (tag_len < kProbeTagSize && tag[tag_len] != 0) ++tag_len;
  for (std::size_t i = tag_len; i < kProbeTagSize; ++i) {
    if (tag[i] != 0) throw MalformedPacket(29 + i, "probe tag not NUL padded");
  }
  p.probe_tag.assign(reinterpret_cast<const char*>(tag.data()), tag_len);

  const std::size_t len_at = r.offset();
  const std::uint32_t payload_len = r.uint<std::uint32_t>("payload length");
  if (r.remaining() < payload_len) {
    throw MalformedPacket(bytes.size(), "truncated payload");
  }
  if (r.remaining() > payload_len) {
    throw MalformedPacket(kFrameHeaderSize + payload_len, "trailing bytes after payload");
  }

  const std::size_t w = static_cast<std::size_t>(p.bounds.width());
  const std::size_t h = static_cast<std::size_t>(p.bounds.height());
  const std::size_t pixels = w * h;
  if (payload_len < pixels + 4) throw MalformedPacket(len_at, "payload too short for crop");
  const auto crop = r.take(pixels, "crop");
  p.crop.width = static_cast<int>(w);
  p.crop.height = static_cast<int>(h);
  p.crop.pixels.assign(crop.begin(), crop.end());

  const std::size_t runs_at = r.offset();
  const std::uint32_t run_count = r.uint<std::uint32_t>("run count");
  if (static_cast<std::uint64_t>(run_count) * 4 != r.remaining()) {
    throw MalformedPacket(runs_at, "run count disagrees with payload length");
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(pixels);
  std::uint8_t value = 0;
  for (std::uint32_t i = 0; i < run_count; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t run = r.uint<std::uint32_t>("run");
    if (run > pixels - bits.size()) throw MalformedPacket(at, "mask runs overflow crop");
    if (run == 0 && i > 0) throw MalformedPacket(at, "empty interior run");
    bits.insert(bits.end(), run, value);
    value ^= 1;
  }
  if (bits.size() != pixels) throw MalformedPacket(r.offset(), "mask runs underflow crop");
  p.mask = ImageMask(static_cast<int>(w), static_cast<int>(h), std::move(bits));
  return p;
}

TrackingPacket make_tracking_packet(const ToolPose& pose, std::uint64_t timestamp_us) {
  TrackingPacket p;
  p.tool_id = static_cast<std::uint8_t>(pose.tool_id);
  p.timestamp_us = timestamp_us;
  p.quaternion = pose.transform.quaternion();
  const Vec3& t = pose.transform.translation();
  p.translation = {t.x(), t.y(), t.z()};
  p.rms_error = static_cast<float>(pose.rms_error);
  p.occluded_count = static_cast<std::uint8_t>(pose.occluded_count);
  return p;
}

std::array<std::uint8_t, kTrackingPacketSize> encode_tracking(const TrackingPacket& p) {
  std::vector<std::uint8_t> out;
  out.reserve(kTrackingPacketSize);
  Writer w(out);
  w.bytes(kTrackingMagic.data(), 4);
  w.uint(p.version);
  w.uint(p.tool_id);
  w.uint(p.timestamp_us);
  for (double q : p.quaternion) w.f64(q);
  for (double t : p.translation) w.f64(t);
  w.f32(p.rms_error);
  w.uint(p.occluded_count);
  std::array<std::uint8_t, kTrackingPacketSize> arr{};
  std::memcpy(arr.data(), out.data(), kTrackingPacketSize);
  return arr;
}

TrackingPacket decode_tracking(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, kTrackingMagic);
  TrackingPacket p;
  p.version = r.uint<std::uint8_t>("version");
  if (p.version != kTrackingVersion) throw MalformedPacket(4, "unsupported version");
  p.tool_id = r.uint<std::uint8_t>("tool_id");
  p.timestamp_us = r.uint<std::uint64_t>("timestamp");
  for (double& q : p.quaternion) q = r.f64("quaternion");
  for (double& t : p.translation) t = r.f64("translation");
  p.rms_error = r.f32("rms_error");
  p.occluded_count = r.uint<std::uint8_t>("occluded_count");
  if (r.remaining() != 0) {
    throw MalformedPacket(kTrackingPacketSize, "trailing bytes after tracking packet");
  }
  const auto& q = p.quaternion;
  const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (std::abs(norm - 1.0) > kAnalyticTolerance) {
    throw Error(ErrorCode::kNonUnitQuaternion,
                "tracking quaternion norm " + std::to_string(norm));
  }
  return p;
}

}  // namespace usnav
