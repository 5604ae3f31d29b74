#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "usnav/geometry.hpp"

namespace usnav {

// Row-major validity grid; a non-zero byte marks a valid pixel.
class ImageMask {
 public:
  ImageMask() = default;
  // Throws kDimensionMismatch if bits.size() != width * height.
  ImageMask(int width, int height, std::vector<std::uint8_t> bits);
  static ImageMask filled(int width, int height, bool value);

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int u, int v) const {
    return bits_[static_cast<std::size_t>(v) * width_ + u] != 0;
  }
  void set(int u, int v, bool value) {
    bits_[static_cast<std::size_t>(v) * width_ + u] = value ? 1 : 0;
  }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::size_t valid_count() const;
  // True iff valid pixels exist and form a single 4-connected component.
  bool is_single_component() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int u, int v) const {
    return pixels[static_cast<std::size_t>(v) * width + u];
  }
};

// Inclusive pixel bounds.
struct BoundingBox {
  int u_min = 0;
  int u_max = 0;
  int v_min = 0;
  int v_max = 0;

  int width() const { return u_max - u_min + 1; }
  int height() const { return v_max - v_min + 1; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class ProbeKind { kConvex, kLinear };

const char* probe_kind_name(ProbeKind kind);
ProbeKind parse_probe_kind(const std::string& name);

struct TopCorners {
  int u_left;
  int u_right;
};

// Minimum run of consecutive valid pixels a row needs to count as the top edge.
inline constexpr int kTopEdgeMinRun = 5;

BoundingBox extract_bounds(const ImageMask& mask);
TopCorners detect_top_corners(const ImageMask& mask, const BoundingBox& bounds);

struct ProbeGeometry {
  ProbeKind kind = ProbeKind::kConvex;
  double pixel_width = 0.0;  // mm / px
  int origin_u = 0;          // u_c
  int origin_v = 0;          // v_c
  double sensor_width = 0.0;  // L, mm
  int u_left = 0;
  int u_right = 0;
  BoundingBox bounds;
  std::string probe_tag;

  // Image -> tool extrinsic (scale pw in x/y, no rotation). Acts on pixel
  // coordinates relative to the bounding box, i.e. the streamed crop.
  Eigen::Matrix4d extrinsic() const;

  // Full-frame pixel -> tool frame (mm, z = 0) and back.
  Vec3 pixel_to_tool(double u, double v) const;
  Eigen::Vector2d tool_to_pixel(const Vec3& p) const;
};

ProbeGeometry compute_probe_geometry(const ImageMask& mask, ProbeKind kind,
                                     double sensor_width,
                                     std::string probe_tag = {});

// Crop + mask restricted to the bounding box. Invalid pixels are transparent.
struct PackagedFrame {
  GrayImage crop;
  ImageMask mask;
  BoundingBox bounds;
  std::string probe_tag;

  std::size_t transparent_count() const {
    return mask.bits().size() - mask.valid_count();
  }
};

PackagedFrame package_frame(const GrayImage& image, const ImageMask& mask,
                            const ProbeGeometry& geom);

// Convex fan with a flat top edge, sampled at integer pixel centres. The
// apex sits above the top row; the fan is cut by an arc of radius `radius`
// around the apex. Used for fixtures and as an analytic oracle.
struct FanSpec {
  int width = 0;
  int height = 0;
  double apex_u = 0.0;
  int top_v = 0;
  double top_half_span = 0.0;  // px, half of (u_right - u_left)
  double half_angle = 0.0;     // rad
  double radius = 0.0;         // px from apex

  double apex_v() const;
  bool contains(int u, int v) const;
  ImageMask rasterize() const;
  // Closed-form bounds and corners of the rasterized fan.
  BoundingBox analytic_bounds() const;
  TopCorners analytic_corners() const;
  FanSpec scaled(int factor) const;
};

}  // namespace usnav
