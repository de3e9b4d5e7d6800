#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rgbdtrack/error.hpp"
#include "rgbdtrack/grid.hpp"
#include "rgbdtrack/parallel.hpp"

namespace rgbdtrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kImageWidth = 640;
inline constexpr int kImageHeight = 480;

/// Depth sentinel for "no data". Valid depths are strictly positive.
inline constexpr double kInvalidDepth = 0.0;

inline bool is_valid_depth(double z) noexcept { return z > 0.0 && std::isfinite(z); }

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate(int width, int height) const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::kInvalidInput, "focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw Error(ErrorCode::kInvalidInput, "principal point outside the image");
    }
  }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Rigid transform p' = R p + t. Orthonormality is checked once, here.
class Extrinsics {
 public:
  Extrinsics() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  Extrinsics(const Mat3& rotation, const Vec3& translation) : rotation_(rotation), translation_(translation) {
    constexpr double kTol = 1e-9;
    if (!rotation_.allFinite() || !translation_.allFinite()) {
      throw Error(ErrorCode::kInvalidInput, "extrinsics must be finite");
    }
    if ((rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff() > kTol) {
      throw Error(ErrorCode::kInvalidInput, "rotation is not orthonormal");
    }
    if (std::abs(rotation_.determinant() - 1.0) > kTol) {
      throw Error(ErrorCode::kInvalidInput, "rotation determinant is not +1");
    }
  }

  static Extrinsics identity() { return {}; }

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Extrinsics inverse() const {
    Extrinsics inv;
    inv.rotation_ = rotation_.transpose();
    inv.translation_ = -(rotation_.transpose() * translation_);
    return inv;
  }

  /// (this * other)(p) = this(other(p))
  Extrinsics compose(const Extrinsics& other) const {
    Extrinsics out;
    out.rotation_ = rotation_ * other.rotation_;
    out.translation_ = rotation_ * other.translation_ + translation_;
    return out;
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline Vec3 transform_point(const Vec3& p, const Extrinsics& e) { return e.rotation() * p + e.translation(); }

struct CameraModel {
  Intrinsics ir;
  Intrinsics rgb;
  Extrinsics ir_to_rgb;
  Extrinsics camera_to_world;  // camera frame == IR frame
  int width = kImageWidth;
  int height = kImageHeight;
  // Compatibility switch: re-project into the colour imager with the IR
  // intrinsics, as the printed registration formula does.
  bool rgb_projection_uses_ir_intrinsics = false;

  const Intrinsics& rgb_projection_intrinsics() const { return rgb_projection_uses_ir_intrinsics ? ir : rgb; }

  void validate() const {
    if (width != kImageWidth || height != kImageHeight) {
      throw Error(ErrorCode::kInvalidInput, "camera images must be 640x480");
    }
    ir.validate(width, height);
    rgb.validate(width, height);
  }
};

inline Vec3 backproject(double u, double v, double z, const Intrinsics& k) {
  if (!is_valid_depth(z)) throw Error(ErrorCode::kInvalidInput, "backproject needs a positive depth");
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

inline Vec2 project(const Vec3& p, const Intrinsics& k) {
  if (!(p.z() > 0.0)) throw Error(ErrorCode::kBehindCamera, "point is not in front of the camera");
  return {p.x() * k.fx / p.z() + k.cx, p.y() * k.fy / p.z() + k.cy};
}

/// Nearest pixel under floor(x + 0.5) rounding.
inline int nearest_pixel(double x) { return static_cast<int>(std::floor(x + 0.5)); }

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct DepthFrame {
  Grid<double> data;
  std::int64_t timestamp = 0;

  DepthFrame() = default;
  DepthFrame(int width, int height, std::int64_t t) : data(width, height, kInvalidDepth), timestamp(t) {}
  int width() const { return data.width(); }
  int height() const { return data.height(); }
  std::size_t count_valid() const {
    std::size_t n = 0;
    for (double z : data.pixels()) n += is_valid_depth(z) ? 1 : 0;
    return n;
  }
};

struct ColorFrame {
  Grid<Rgb> data;
  std::int64_t timestamp = 0;

  ColorFrame() = default;
  ColorFrame(int width, int height, std::int64_t t, Rgb fill = {}) : data(width, height, fill), timestamp(t) {}
  int width() const { return data.width(); }
  int height() const { return data.height(); }
};

struct CloudPoint {
  Vec3 position;  // IR camera frame, meters
  Rgb color;
  std::uint16_t u = 0;  // source depth pixel
  std::uint16_t v = 0;
  std::uint16_t rgb_u = 0;  // colour pixel the point was sampled from
  std::uint16_t rgb_v = 0;
};

using PointCloud = std::vector<CloudPoint>;

/// Maps one depth pixel into the colour image. Returns false when the point
/// lands behind the colour camera or outside the image.
inline bool register_pixel(int u, int v, double z, const CameraModel& cam, CloudPoint& out) {
  const Vec3 p = backproject(u, v, z, cam.ir);
  const Vec3 p_rgb = transform_point(p, cam.ir_to_rgb);
  if (!(p_rgb.z() > 0.0)) return false;
  const Vec2 uv = project(p_rgb, cam.rgb_projection_intrinsics());
  const int cu = nearest_pixel(uv.x());
  const int cv = nearest_pixel(uv.y());
  if (cu < 0 || cv < 0 || cu >= cam.width || cv >= cam.height) return false;
  out.position = p;
  out.u = static_cast<std::uint16_t>(u);
  out.v = static_cast<std::uint16_t>(v);
  out.rgb_u = static_cast<std::uint16_t>(cu);
  out.rgb_v = static_cast<std::uint16_t>(cv);
  return true;
}

/// IR -> RGB registration: one coloured point per valid depth pixel that
/// reprojects inside the colour image, in depth-pixel raster order.
inline PointCloud register_frame(const DepthFrame& depth, const ColorFrame& color, const CameraModel& cam) {
  if (depth.timestamp != color.timestamp) {
    throw Error(ErrorCode::kSynchronization, "depth and colour frames have different timestamps");
  }
  if (depth.width() != cam.width || depth.height() != cam.height || color.width() != cam.width ||
      color.height() != cam.height) {
    throw Error(ErrorCode::kDimensionMismatch, "frame size does not match camera model");
  }
  // Each row fills its own segment of a full-size buffer; the segments are
  // then packed in row order.
  const auto w = static_cast<std::size_t>(depth.width());
  PointCloud cloud(w * static_cast<std::size_t>(depth.height()));
  std::vector<std::size_t> counts(static_cast<std::size_t>(depth.height()), 0);
  const Intrinsics& ir = cam.ir;
  const Intrinsics& k = cam.rgb_projection_intrinsics();
  const Mat3& r = cam.ir_to_rgb.rotation();
  const Vec3& t = cam.ir_to_rgb.translation();
  parallel_rows(depth.height(), [&](int v) {
    CloudPoint* out = cloud.data() + static_cast<std::size_t>(v) * w;
    std::size_t n = 0;
    const auto zrow = depth.data.row(v);
    const double dv = v - ir.cy;
    for (int u = 0; u < depth.width(); ++u) {
      const double z = zrow[static_cast<std::size_t>(u)];
      if (!is_valid_depth(z)) continue;
      // Same arithmetic as register_pixel, without its per-call checks.
      const Vec3 p{(u - ir.cx) * z / ir.fx, dv * z / ir.fy, z};
      const Vec3 q = r * p + t;
      if (!(q.z() > 0.0)) continue;
      const int cu = nearest_pixel(q.x() * k.fx / q.z() + k.cx);
      const int cv = nearest_pixel(q.y() * k.fy / q.z() + k.cy);
      if (cu < 0 || cv < 0 || cu >= cam.width || cv >= cam.height) continue;
      CloudPoint& pt = out[n++];
      pt.position = p;
      pt.u = static_cast<std::uint16_t>(u);
      pt.v = static_cast<std::uint16_t>(v);
      pt.rgb_u = static_cast<std::uint16_t>(cu);
      pt.rgb_v = static_cast<std::uint16_t>(cv);
      pt.color = color.data(cu, cv);
    }
    counts[static_cast<std::size_t>(v)] = n;
  });
  std::size_t total = 0;
  for (std::size_t v = 0; v < counts.size(); ++v) {
    if (total != v * w) std::copy_n(cloud.begin() + static_cast<std::ptrdiff_t>(v * w), counts[v], cloud.begin() + static_cast<std::ptrdiff_t>(total));
    total += counts[v];
  }
  cloud.resize(total);
  return cloud;
}

/// For every colour pixel, the index of the nearest cloud point that was
/// sampled there, or -1.
inline Grid<std::int32_t> index_by_color_pixel(const PointCloud& cloud, int width, int height) {
  Grid<std::int32_t> index(width, height, -1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& pt = cloud[i];
    auto& slot = index(pt.rgb_u, pt.rgb_v);
    if (slot < 0 || pt.position.z() < cloud[static_cast<std::size_t>(slot)].position.z()) {
      slot = static_cast<std::int32_t>(i);
    }
  }
  return index;
}

/// Rotation whose columns are the camera axes (x right, y down, z forward)
/// expressed in the world, for a camera at `eye` looking at `target`.
inline Extrinsics look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up = Vec3::UnitZ()) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(world_up);
  if (right.norm() < 1e-9) throw Error(ErrorCode::kInvalidInput, "look_at direction is parallel to up");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Extrinsics(r, eye);
}

}  // namespace rgbdtrack
