#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rgbdtrack/camera_geometry.hpp"
#include "rgbdtrack/color.hpp"
#include "rgbdtrack/math.hpp"
#include "rgbdtrack/parallel.hpp"
#include "rgbdtrack/sensor_simulator.hpp"

namespace rgbdtrack {

using HsvFrame = Grid<Hsv>;
using BinaryMask = Grid<std::uint8_t>;

inline HsvFrame rgb_to_hsv(const ColorFrame& frame) {
  HsvFrame out(frame.width(), frame.height());
  parallel_rows(frame.height(), [&](int v) {
    const auto in = frame.data.row(v);
    auto dst = out.row(v);
    for (std::size_t u = 0; u < in.size(); ++u) dst[u] = rgb_to_hsv(in[u]);
  });
  return out;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

/// Box in HSV space. The hue interval wraps through 0 degrees when
/// hue.lo > hue.hi, e.g. [350, 10].
struct HsvRange {
  Interval hue{0.0, 360.0};
  Interval saturation{0.0, 1.0};
  Interval value{0.0, 1.0};

  bool contains(const Hsv& c) const noexcept {
    const bool hue_ok = hue.lo <= hue.hi ? hue.contains(c.h) : (c.h >= hue.lo || c.h <= hue.hi);
    return hue_ok && saturation.contains(c.s) && value.contains(c.v);
  }

  void validate() const {
    auto in = [](const Interval& i, double lo, double hi) { return i.lo >= lo && i.lo <= hi && i.hi >= lo && i.hi <= hi; };
    if (!in(hue, 0.0, 360.0) || !in(saturation, 0.0, 1.0) || !in(value, 0.0, 1.0)) {
      throw Error(ErrorCode::kInvalidInput, "HSV range bounds outside their domains");
    }
  }
};

inline BinaryMask threshold_mask(const HsvFrame& frame, const HsvRange& range) {
  BinaryMask out(frame.width(), frame.height(), 0);
  parallel_rows(frame.height(), [&](int v) {
    const auto in = frame.row(v);
    auto dst = out.row(v);
    for (std::size_t u = 0; u < in.size(); ++u) dst[u] = range.contains(in[u]) ? 1 : 0;
  });
  return out;
}

/// HSV conversion and thresholding in one pass, one mask per range. Runs of
/// identical colour reuse the previous pixel's result.
inline std::vector<BinaryMask> threshold_color(const ColorFrame& frame, std::span<const HsvRange> ranges) {
  std::vector<BinaryMask> out(ranges.size(), BinaryMask(frame.width(), frame.height(), 0));
  parallel_rows(frame.height(), [&](int v) {
    const auto in = frame.data.row(v);
    std::vector<std::uint8_t> hit(ranges.size(), 0);
    for (std::size_t u = 0; u < in.size(); ++u) {
      if (u == 0 || !(in[u] == in[u - 1])) {
        const Hsv hsv = rgb_to_hsv(in[u]);
        for (std::size_t k = 0; k < ranges.size(); ++k) hit[k] = ranges[k].contains(hsv) ? 1 : 0;
      }
      for (std::size_t k = 0; k < ranges.size(); ++k) out[k](static_cast<int>(u), v) = hit[k];
    }
  });
  return out;
}

namespace detail {

// Square min/max filter of half-width r along one axis. Pixels outside the
// image count as false, so erosion clears everything within r of the border.
inline BinaryMask box_pass(const BinaryMask& in, int r, bool horizontal, bool erode) {
  BinaryMask out(in.width(), in.height(), 0);
  const int len = horizontal ? in.width() : in.height();
  const int lines = horizontal ? in.height() : in.width();
  parallel_rows(lines, [&](int line) {
    std::vector<int> prefix(static_cast<std::size_t>(len) + 1, 0);
    auto at = [&](int i) { return horizontal ? in(i, line) : in(line, i); };
    for (int i = 0; i < len; ++i) prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + (at(i) ? 1 : 0);
    for (int i = 0; i < len; ++i) {
      const int a = i - r;
      const int b = i + r;
      const int count = prefix[static_cast<std::size_t>(std::min(b, len - 1)) + 1] - prefix[static_cast<std::size_t>(std::max(a, 0))];
      const bool on = erode ? (a >= 0 && b < len && count == 2 * r + 1) : count > 0;
      if (horizontal) {
        out(i, line) = on ? 1 : 0;
      } else {
        out(line, i) = on ? 1 : 0;
      }
    }
  });
  return out;
}

}  // namespace detail

inline BinaryMask erode(const BinaryMask& mask, int r) {
  return detail::box_pass(detail::box_pass(mask, r, true, true), r, false, true);
}

inline BinaryMask dilate(const BinaryMask& mask, int r) {
  return detail::box_pass(detail::box_pass(mask, r, true, false), r, false, false);
}

/// Erosion then dilation with a (2r+1) x (2r+1) square. Only the bounding
/// rectangle of the set pixels, padded by r, is processed; everything
/// outside it is false before and after.
inline BinaryMask morph_open(const BinaryMask& mask, int kernel_radius) {
  if (kernel_radius < 1) throw Error(ErrorCode::kInvalidInput, "kernel_radius must be >= 1");
  int u0 = mask.width(), u1 = -1, v0 = mask.height(), v1 = -1;
  for (int v = 0; v < mask.height(); ++v) {
    const auto row = mask.row(v);
    for (int u = 0; u < mask.width(); ++u) {
      if (!row[static_cast<std::size_t>(u)]) continue;
      u0 = std::min(u0, u);
      u1 = std::max(u1, u);
      v0 = std::min(v0, v);
      v1 = std::max(v1, v);
    }
  }
  BinaryMask out(mask.width(), mask.height(), 0);
  if (u1 < 0) return out;
  const int r = kernel_radius;
  const int cu0 = std::max(u0 - r, 0), cu1 = std::min(u1 + r, mask.width() - 1);
  const int cv0 = std::max(v0 - r, 0), cv1 = std::min(v1 + r, mask.height() - 1);
  // Crop borders that coincide with the image border keep the
  // out-of-image-is-false rule; the others only border false pixels.
  BinaryMask crop(cu1 - cu0 + 1, cv1 - cv0 + 1, 0);
  for (int v = cv0; v <= cv1; ++v) {
    for (int u = cu0; u <= cu1; ++u) crop(u - cu0, v - cv0) = mask(u, v);
  }
  const BinaryMask opened = dilate(erode(crop, r), r);
  for (int v = cv0; v <= cv1; ++v) {
    for (int u = cu0; u <= cu1; ++u) out(u, v) = opened(u - cu0, v - cv0);
  }
  return out;
}

/// Connected component with its raw moments m00, m10, m01.
struct Blob {
  std::int32_t label = 0;
  std::int64_t area = 0;
  std::int64_t sum_u = 0;
  std::int64_t sum_v = 0;
  int u_min = 0, u_max = 0, v_min = 0, v_max = 0;  // bounding rectangle

  Vec2 centroid() const {
    return {static_cast<double>(sum_u) / static_cast<double>(area), static_cast<double>(sum_v) / static_cast<double>(area)};
  }
};

struct ComponentLabels {
  Grid<std::int32_t> labels;  // 0 = background, otherwise blob label (1-based)
  std::vector<Blob> blobs;    // blobs[label - 1]
};

/// 8-connected labeling in raster order of each component's first pixel.
inline ComponentLabels label_components(const BinaryMask& mask) {
  ComponentLabels out{Grid<std::int32_t>(mask.width(), mask.height(), 0), {}};
  std::vector<std::pair<int, int>> stack;
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      if (!mask(u, v) || out.labels(u, v) != 0) continue;
      Blob blob;
      blob.label = static_cast<std::int32_t>(out.blobs.size()) + 1;
      blob.u_min = blob.u_max = u;
      blob.v_min = blob.v_max = v;
      out.labels(u, v) = blob.label;
      stack.emplace_back(u, v);
      while (!stack.empty()) {
        const auto [pu, pv] = stack.back();
        stack.pop_back();
        ++blob.area;
        blob.sum_u += pu;
        blob.sum_v += pv;
        blob.u_min = std::min(blob.u_min, pu);
        blob.u_max = std::max(blob.u_max, pu);
        blob.v_min = std::min(blob.v_min, pv);
        blob.v_max = std::max(blob.v_max, pv);
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const int nu = pu + du;
            const int nv = pv + dv;
            if (!mask.contains(nu, nv) || !mask(nu, nv) || out.labels(nu, nv) != 0) continue;
            out.labels(nu, nv) = blob.label;
            stack.emplace_back(nu, nv);
          }
        }
      }
      out.blobs.push_back(blob);
    }
  }
  return out;
}

/// Components with area >= min_area, largest first (ties keep raster order).
inline std::vector<Blob> select_blobs(const ComponentLabels& components, std::int64_t min_area) {
  std::vector<Blob> out;
  for (const auto& b : components.blobs) {
    if (b.area >= min_area) out.push_back(b);
  }
  std::stable_sort(out.begin(), out.end(), [](const Blob& a, const Blob& b) { return a.area > b.area; });
  return out;
}

inline std::vector<Blob> extract_centroids(const BinaryMask& mask, std::int64_t min_area = 1) {
  return select_blobs(label_components(mask), min_area);
}

/// Marker positions indexed by MarkerId; nullopt when not seen.
using MarkerTriple = std::array<std::optional<Vec3>, kMarkerCount>;

/// Robot pose from its three markers: the triangle centre and the heading
/// of the front marker seen from that centre, in the horizontal plane.
/// Missing or (near-)collinear markers give no measurement.
inline std::optional<RobotPose> compute_pose(const MarkerTriple& markers, double min_triangle_area = 1e-6) {
  if (!markers[0] || !markers[1] || !markers[2]) return std::nullopt;
  const Vec3& f = *markers[kFrontMarker];
  const Vec3& l = *markers[kLeftMarker];
  const Vec3& r = *markers[kRightMarker];
  if (0.5 * (l - f).cross(r - f).norm() <= min_triangle_area) return std::nullopt;
  RobotPose pose;
  pose.position = (f + l + r) / 3.0;
  const Vec3 heading = f - pose.position;
  pose.yaw = std::atan2(heading.y(), heading.x());
  return pose;
}

struct MarkerSighting {
  bool visible = false;
  Vec2 pixel = Vec2::Zero();  // colour-image centroid
  std::int64_t area = 0;
  std::size_t depth_points = 0;
  Vec3 position = Vec3::Zero();  // IR camera frame
};

struct MarkerObservation {
  std::array<MarkerSighting, kMarkerCount> markers{};

  bool all_visible() const { return markers[0].visible && markers[1].visible && markers[2].visible; }

  MarkerTriple positions() const {
    MarkerTriple out;
    for (int m = 0; m < kMarkerCount; ++m) {
      if (markers[m].visible) out[m] = markers[m].position;
    }
    return out;
  }
};

/// How a marker's 3D position is read from the registered cloud.
enum class MarkerDepthMode {
  kCentroidPixel,  // the point registered at the blob centroid (nearest blob point if none)
  kBlobMean,       // mean of the blob's points within a depth window around their median
};

struct MarkerDetectorConfig {
  HsvRange rear_range{{40.0, 70.0}, {0.5, 1.0}, {0.4, 1.0}};
  HsvRange front_range{{100.0, 140.0}, {0.5, 1.0}, {0.3, 1.0}};
  int kernel_radius = 1;
  std::int64_t min_area = -1;  // < 0: kernel area (2r+1)^2
  MarkerDepthMode depth_mode = MarkerDepthMode::kCentroidPixel;
  // kBlobMean: depth points further than this many level gaps from the
  // blob's median depth are ignored.
  double depth_window_gaps = 3.0;

  std::int64_t effective_min_area() const {
    return min_area >= 0 ? min_area : static_cast<std::int64_t>(2 * kernel_radius + 1) * (2 * kernel_radius + 1);
  }
};

/// Segments the markers in the colour frame and places each in 3D using the
/// registered depth points that fall inside its blob. Front is the largest
/// front-coloured blob; the two largest rear-coloured blobs are labelled
/// left/right by their side of the heading, using the world up direction.
inline MarkerObservation detect_markers(const ColorFrame& color, const PointCloud& cloud, const CameraModel& cam,
                                        const DepthLevels& levels, const MarkerDetectorConfig& config) {
  const std::array<HsvRange, 2> ranges{config.rear_range, config.front_range};
  const std::vector<BinaryMask> masks = threshold_color(color, ranges);
  const ComponentLabels rear = label_components(morph_open(masks[0], config.kernel_radius));
  const ComponentLabels front = label_components(morph_open(masks[1], config.kernel_radius));
  const std::vector<Blob> rear_blobs = select_blobs(rear, config.effective_min_area());
  const std::vector<Blob> front_blobs = select_blobs(front, config.effective_min_area());

  struct Candidate {
    const Blob* blob = nullptr;
    const ComponentLabels* components = nullptr;
    std::vector<const CloudPoint*> points;
  };
  std::array<Candidate, kMarkerCount> cand{};
  if (!front_blobs.empty()) cand[0] = {&front_blobs[0], &front, {}};
  if (rear_blobs.size() >= 1) cand[1] = {&rear_blobs[0], &rear, {}};
  if (rear_blobs.size() >= 2) cand[2] = {&rear_blobs[1], &rear, {}};

  // Bounding rectangle of the candidate blobs, to skip most of the cloud cheaply.
  int bu0 = color.width(), bu1 = -1, bv0 = color.height(), bv1 = -1;
  for (const auto& c : cand) {
    if (c.blob == nullptr) continue;
    bu0 = std::min(bu0, c.blob->u_min);
    bu1 = std::max(bu1, c.blob->u_max);
    bv0 = std::min(bv0, c.blob->v_min);
    bv1 = std::max(bv1, c.blob->v_max);
  }
  for (const auto& pt : cloud) {
    if (pt.rgb_u < bu0 || pt.rgb_u > bu1 || pt.rgb_v < bv0 || pt.rgb_v > bv1) continue;
    for (auto& c : cand) {
      if (c.blob != nullptr && c.components->labels(pt.rgb_u, pt.rgb_v) == c.blob->label) c.points.push_back(&pt);
    }
  }

  std::array<MarkerSighting, kMarkerCount> found{};
  for (int m = 0; m < kMarkerCount; ++m) {
    const Candidate& c = cand[m];
    if (c.blob == nullptr) continue;
    MarkerSighting& s = found[m];
    s.pixel = c.blob->centroid();
    s.area = c.blob->area;
    if (c.points.empty()) continue;
    if (config.depth_mode == MarkerDepthMode::kCentroidPixel) {
      const CloudPoint* best = nullptr;
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto* p : c.points) {
        const double d = square(p->rgb_u - s.pixel.x()) + square(p->rgb_v - s.pixel.y());
        if (d < best_d || (d == best_d && p->position.z() < best->position.z())) {
          best = p;
          best_d = d;
        }
      }
      s.position = best->position;
      s.depth_points = 1;
      s.visible = true;
      continue;
    }
    std::vector<double> depths;
    depths.reserve(c.points.size());
    for (const auto* p : c.points) depths.push_back(p->position.z());
    auto mid = depths.begin() + static_cast<std::ptrdiff_t>(depths.size() / 2);
    std::nth_element(depths.begin(), mid, depths.end());
    const double median = *mid;
    const double window = config.depth_window_gaps * levels.level_gap(median);
    Vec3 sum = Vec3::Zero();
    std::size_t n = 0;
    for (const auto* p : c.points) {
      if (std::abs(p->position.z() - median) <= window) {
        sum += p->position;
        ++n;
      }
    }
    if (n == 0) continue;
    s.position = sum / static_cast<double>(n);
    s.depth_points = n;
    s.visible = true;
  }

  MarkerObservation obs;
  obs.markers[kFrontMarker] = found[0];
  if (found[0].visible && found[1].visible && found[2].visible) {
    const Vec3 up = cam.camera_to_world.rotation().transpose() * Vec3::UnitZ();
    const Vec3 centre = (found[0].position + found[1].position + found[2].position) / 3.0;
    const double side = (found[0].position - centre).cross(found[1].position - centre).dot(up);
    obs.markers[kLeftMarker] = side > 0.0 ? found[1] : found[2];
    obs.markers[kRightMarker] = side > 0.0 ? found[2] : found[1];
  }
  // Without the front marker the rear pair cannot be told apart; both stay unseen.
  return obs;
}

}  // namespace rgbdtrack
