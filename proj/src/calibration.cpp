#include "usnav/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/LU>

namespace usnav {

ImageMask::ImageMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width_ <= 0 || height_ <= 0 ||
      bits_.size() != static_cast<std::size_t>(width_) * height_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "mask bits do not match its dimensions");
  }
  for (std::uint8_t& b : bits_) b = b != 0;
}

ImageMask ImageMask::filled(int width, int height, bool value) {
  return ImageMask(width, height,
                   std::vector<std::uint8_t>(
                       static_cast<std::size_t>(width) * height, value ? 1 : 0));
}

std::size_t ImageMask::valid_count() const {
  return static_cast<std::size_t>(
      std::count_if(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; }));
}

bool ImageMask::is_single_component() const {
  const auto first = std::find_if(bits_.begin(), bits_.end(),
                                  [](std::uint8_t b) { return b != 0; });
  if (first == bits_.end()) return false;
  std::vector<char> seen(bits_.size(), 0);
  std::deque<std::size_t> queue{static_cast<std::size_t>(first - bits_.begin())};
  seen[queue.front()] = 1;
  std::size_t reached = 0;
  while (!queue.empty()) {
    const std::size_t idx = queue.front();
    queue.pop_front();
    ++reached;
    const int u = static_cast<int>(idx % width_);
    const int v = static_cast<int>(idx / width_);
    const int du[] = {1, -1, 0, 0};
    const int dv[] = {0, 0, 1, -1};
    for (int i = 0; i < 4; ++i) {
      const int nu = u + du[i];
      const int nv = v + dv[i];
      if (nu < 0 || nv < 0 || nu >= width_ || nv >= height_) continue;
      const std::size_t n = static_cast<std::size_t>(nv) * width_ + nu;
      if (bits_[n] && !seen[n]) {
        seen[n] = 1;
        queue.push_back(n);
      }
    }
  }
  return reached == valid_count();
}

const char* probe_kind_name(ProbeKind kind) {
  return kind == ProbeKind::kConvex ? "convex" : "linear";
}

ProbeKind parse_probe_kind(const std::string& name) {
  if (name == "convex") return ProbeKind::kConvex;
  if (name == "linear") return ProbeKind::kLinear;
  throw Error(ErrorCode::kInvalidArgument, "unknown probe kind '" + name + "'");
}

BoundingBox extract_bounds(const ImageMask& mask) {
  BoundingBox box{mask.width(), -1, mask.height(), -1};
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      if (!mask.at(u, v)) continue;
      box.u_min = std::min(box.u_min, u);
      box.u_max = std::max(box.u_max, u);
      box.v_min = std::min(box.v_min, v);
      box.v_max = std::max(box.v_max, v);
    }
  }
  if (box.u_max < 0) throw Error(ErrorCode::kEmptyMask, "mask has no valid pixel");
  return box;
}

TopCorners detect_top_corners(const ImageMask& mask, const BoundingBox& bounds) {
  for (int v = bounds.v_min; v <= bounds.v_max; ++v) {
    int longest = 0;
    int run = 0;
    int left = -1;
    int right = -1;
    for (int u = bounds.u_min; u <= bounds.u_max; ++u) {
      if (mask.at(u, v)) {
        ++run;
        longest = std::max(longest, run);
        if (left < 0) left = u;
        right = u;
      } else {
        run = 0;
      }
    }
    if (longest >= kTopEdgeMinRun) {
      if (right - left < 1) break;
      return {left, right};
    }
  }
  throw Error(ErrorCode::kDegenerateTopEdge,
              "no row with a valid run of at least 5 pixels");
}

ProbeGeometry compute_probe_geometry(const ImageMask& mask, ProbeKind kind,
                                     double sensor_width,
                                     std::string probe_tag) {
  if (!(sensor_width > 0.0) || !std::isfinite(sensor_width)) {
    throw Error(ErrorCode::kInvalidArgument, "sensor width must be positive");
  }
  ProbeGeometry g;
  g.kind = kind;
  g.sensor_width = sensor_width;
  g.probe_tag = std::move(probe_tag);
  g.bounds = extract_bounds(mask);
  const TopCorners corners = detect_top_corners(mask, g.bounds);
  g.u_left = corners.u_left;
  g.u_right = corners.u_right;

  int span_lo = g.u_left;
  int span_hi = g.u_right;
  if (kind == ProbeKind::kLinear) {
    span_lo = g.bounds.u_min;
    span_hi = g.bounds.u_max;
  }
  if (span_hi <= span_lo) {
    throw Error(ErrorCode::kDegenerateTopEdge, "zero-width probe aperture");
  }
  g.pixel_width = sensor_width / static_cast<double>(span_hi - span_lo);
  // Midpoint rounded half away from zero (indices are non-negative).
  g.origin_u = (span_lo + span_hi + 1) / 2;

  g.origin_v = -1;
  for (int v = g.bounds.v_min; v <= g.bounds.v_max; ++v) {
    if (mask.at(g.origin_u, v)) {
      g.origin_v = v;
      break;
    }
  }
  if (g.origin_v < 0) {
    throw Error(ErrorCode::kDegenerateTopEdge,
                "no valid pixel in the middle column");
  }
  return g;
}

Eigen::Matrix4d ProbeGeometry::extrinsic() const {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t(0, 0) = pixel_width;
  t(1, 1) = pixel_width;
  t(0, 3) = -pixel_width * (origin_u - bounds.u_min);
  t(1, 3) = -pixel_width * (origin_v - bounds.v_min);
  return t;
}

Vec3 ProbeGeometry::pixel_to_tool(double u, double v) const {
  const Eigen::Vector4d crop(u - bounds.u_min, v - bounds.v_min, 0.0, 1.0);
  const Eigen::Vector4d p = extrinsic() * crop;
  return p.head<3>();
}

Eigen::Vector2d ProbeGeometry::tool_to_pixel(const Vec3& p) const {
  const Eigen::Vector4d crop = extrinsic().inverse() * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
  return {crop.x() + bounds.u_min, crop.y() + bounds.v_min};
}

PackagedFrame package_frame(const GrayImage& image, const ImageMask& mask,
                            const ProbeGeometry& geom) {
  if (image.width != mask.width() || image.height != mask.height() ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "image and mask dimensions differ");
  }
  const BoundingBox& b = geom.bounds;
  if (b.u_min < 0 || b.v_min < 0 || b.u_max >= image.width ||
      b.v_max >= image.height || b.u_min > b.u_max || b.v_min > b.v_max) {
    throw Error(ErrorCode::kDimensionMismatch, "bounds exceed the image");
  }
  PackagedFrame out;
  out.bounds = b;
  out.probe_tag = geom.probe_tag;
  out.crop.width = b.width();
  out.crop.height = b.height();
  out.crop.pixels.resize(static_cast<std::size_t>(b.width()) * b.height());
  std::vector<std::uint8_t> bits(out.crop.pixels.size());
  std::size_t i = 0;
  for (int v = b.v_min; v <= b.v_max; ++v) {
    for (int u = b.u_min; u <= b.u_max; ++u, ++i) {
      const bool valid = mask.at(u, v);
      bits[i] = valid ? 1 : 0;
      out.crop.pixels[i] = valid ? image.at(u, v) : 0;
    }
  }
  out.mask = ImageMask(b.width(), b.height(), std::move(bits));
  return out;
}

// ---------------------------------------------------------------------------
// Fan fixture

namespace {
constexpr double kFanEps = 1e-7;
}

double FanSpec::apex_v() const {
  return top_v - top_half_span / std::tan(half_angle);
}

bool FanSpec::contains(int u, int v) const {
  if (u < 0 || v < 0 || u >= width || v >= height || v < top_v) return false;
  const double dx = u - apex_u;
  const double dy = v - apex_v();
  if (dx * dx + dy * dy > radius * radius) return false;
  return std::abs(dx) <= dy * std::tan(half_angle) + kFanEps;
}

ImageMask FanSpec::rasterize() const {
  ImageMask mask = ImageMask::filled(width, height, false);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (contains(u, v)) mask.set(u, v, true);
    }
  }
  return mask;
}

BoundingBox FanSpec::analytic_bounds() const {
  // Per column, the valid rows form one interval [lo, hi]:
  //   lo = max(top, apex_v + |dx| / tan a),  hi = apex_v + sqrt(R^2 - dx^2).
  BoundingBox box{width, -1, height, -1};
  const double t = std::tan(half_angle);
  for (int u = 0; u < width; ++u) {
    const double dx = std::abs(u - apex_u);
    if (dx > radius) continue;
    const double lo_real = std::max<double>(top_v, apex_v() + dx / t);
    const double hi_real = apex_v() + std::sqrt(radius * radius - dx * dx);
    const int lo = std::max(0, static_cast<int>(std::ceil(lo_real - kFanEps)));
    const int hi = std::min(height - 1, static_cast<int>(std::floor(hi_real)));
    if (lo > hi) continue;
    box.u_min = std::min(box.u_min, u);
    box.u_max = std::max(box.u_max, u);
    box.v_min = std::min(box.v_min, lo);
    box.v_max = std::max(box.v_max, hi);
  }
  return box;
}

TopCorners FanSpec::analytic_corners() const {
  return {static_cast<int>(std::lround(apex_u - top_half_span)),
          static_cast<int>(std::lround(apex_u + top_half_span))};
}

FanSpec FanSpec::scaled(int factor) const {
  FanSpec s = *this;
  s.width *= factor;
  s.height *= factor;
  s.apex_u *= factor;
  s.top_v *= factor;
  s.top_half_span *= factor;
  s.radius *= factor;
  return s;
}

}  // namespace usnav
