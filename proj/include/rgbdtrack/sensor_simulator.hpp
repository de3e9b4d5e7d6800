#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <variant>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "rgbdtrack/camera_geometry.hpp"
#include "rgbdtrack/color.hpp"
#include "rgbdtrack/math.hpp"

namespace rgbdtrack {

struct DepthRange {
  double min = 0.8;
  double max = 4.5;
  bool contains(double z) const noexcept { return z >= min && z <= max; }
};

/// Useful depth interval of the sensor, meters.
inline constexpr DepthRange kUsefulDepth{0.8, 4.5};

/// Disparity geometry of a structured-light depth sensor. Raw disparity is
/// reported in 1/8 pixel units: d = (doff - kd) / 8, z = baseline * focal / d.
/// Representable depths ("Z-levels") are those of integer kd.
struct DepthLevels {
  double baseline = 0.075;
  double ir_focal = 580.0;
  double doff = 1090.0;

  void validate() const {
    if (!(baseline > 0.0) || !(ir_focal > 0.0)) {
      throw Error(ErrorCode::kInvalidInput, "baseline and IR focal length must be positive");
    }
  }

  double normalized_disparity(double kd) const { return (doff - kd) / 8.0; }

  double depth_from_disparity(double kd) const {
    const double d = normalized_disparity(kd);
    if (!(d > 0.0)) return kInvalidDepth;
    return baseline * ir_focal / d;
  }

  /// Continuous raw disparity of a depth; inverse of depth_from_disparity.
  double disparity_from_depth(double z) const { return doff - 8.0 * baseline * ir_focal / z; }

  /// Nearest integer raw disparity. Exact ties go to the smaller kd, which
  /// is the larger normalized disparity and therefore the closer depth.
  std::int64_t level_index(double z) const {
    return static_cast<std::int64_t>(std::ceil(disparity_from_depth(z) - 0.5));
  }

  double level_depth(std::int64_t kd) const { return depth_from_disparity(static_cast<double>(kd)); }

  double quantize(double z) const { return level_depth(level_index(z)); }

  /// Distance from the level nearest to z to the next farther level.
  double level_gap(double z) const {
    const std::int64_t kd = level_index(z);
    const double far = level_depth(kd + 1);
    if (!is_valid_depth(far)) return std::numeric_limits<double>::infinity();
    return far - level_depth(kd);
  }

  bool operator==(const DepthLevels&) const = default;
};

/// Per-sensor depth error model.
struct SensorProfile {
  DepthLevels levels;
  // sigma(z) = noise_gap_factor * level_gap(z) + sum_i noise_poly[i] z^i
  double noise_gap_factor = 0.0;
  std::vector<double> noise_poly;
  // Range-dependent systematic over-estimation g(z) = sum_i offset_poly[i] z^i.
  std::vector<double> offset_poly;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  double noise_sigma(double z) const {
    double sigma = horner(noise_poly, z);
    if (noise_gap_factor > 0.0) sigma += noise_gap_factor * levels.level_gap(z);
    return std::max(sigma, 0.0);
  }

  double offset(double z) const { return horner(offset_poly, z); }

  void validate() const {
    levels.validate();
    if (!(dropout_rate >= 0.0 && dropout_rate <= 1.0)) {
      throw Error(ErrorCode::kInvalidInput, "dropout_rate must be in [0, 1]");
    }
    if (noise_gap_factor < 0.0) throw Error(ErrorCode::kInvalidInput, "noise_gap_factor must be >= 0");
    for (double z = kUsefulDepth.min; z <= kUsefulDepth.max; z += 0.05) {
      if (horner(noise_poly, z) + noise_gap_factor * levels.level_gap(z) < 0.0) {
        throw Error(ErrorCode::kInvalidInput, "noise sigma is negative inside the useful range");
      }
    }
  }
};

struct RobotPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;  // radians, zero along world +x, counter-clockwise about +z
};

struct TrajectorySample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  double yaw = 0.0;
};

/// Closed loop around `center`: r(phi) = radius * (1 + modulation * sin(lobes * phi)),
/// phi advancing uniformly with the given period. Heading follows the velocity.
struct SubcircularTrajectory {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;
  double modulation = 0.15;
  int lobes = 3;
  double period = 20.0;
  double height = 0.3;
  double phase = 0.0;

  TrajectorySample sample(double t) const {
    const double w = 2.0 * std::numbers::pi / period;
    const double phi = phase + w * t;
    const double r = radius * (1.0 + modulation * std::sin(lobes * phi));
    const double dr = radius * modulation * lobes * std::cos(lobes * phi) * w;
    const double ddr = -radius * modulation * lobes * lobes * std::sin(lobes * phi) * w * w;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    TrajectorySample out;
    out.position = {center.x() + r * c, center.y() + r * s, height};
    out.velocity = {dr * c - r * s * w, dr * s + r * c * w, 0.0};
    out.acceleration = {ddr * c - 2.0 * dr * s * w - r * c * w * w, ddr * s + 2.0 * dr * c * w - r * s * w * w, 0.0};
    out.yaw = std::atan2(out.velocity.y(), out.velocity.x());
    return out;
  }
};

/// Closed Catmull-Rom loop through waypoints, one segment per `segment_duration`.
struct WaypointTrajectory {
  std::vector<Vec3> waypoints;
  double segment_duration = 2.0;

  TrajectorySample sample(double t) const {
    const auto n = static_cast<std::int64_t>(waypoints.size());
    if (n < 2) throw Error(ErrorCode::kInvalidInput, "waypoint trajectory needs at least two points");
    const double s = t / segment_duration;
    const double seg = std::floor(s);
    const double u = s - seg;
    auto at = [&](std::int64_t i) -> const Vec3& { return waypoints[static_cast<std::size_t>(((i % n) + n) % n)]; };
    const auto i1 = static_cast<std::int64_t>(seg);
    const Vec3& p0 = at(i1 - 1);
    const Vec3& p1 = at(i1);
    const Vec3& p2 = at(i1 + 1);
    const Vec3& p3 = at(i1 + 2);
    const Vec3 a = 2.0 * p1;
    const Vec3 b = p2 - p0;
    const Vec3 c = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
    const Vec3 d = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
    TrajectorySample out;
    out.position = 0.5 * (a + b * u + c * u * u + d * u * u * u);
    out.velocity = 0.5 * (b + 2.0 * c * u + 3.0 * d * u * u) / segment_duration;
    out.acceleration = 0.5 * (2.0 * c + 6.0 * d * u) / (segment_duration * segment_duration);
    // A standing robot keeps the heading of its segment (0 if the segment is empty).
    Vec2 heading = out.velocity.head<2>();
    if (heading.norm() < 1e-9) heading = (p2 - p1).head<2>();
    out.yaw = heading.norm() < 1e-12 ? 0.0 : std::atan2(heading.y(), heading.x());
    return out;
  }
};

using Trajectory = std::variant<SubcircularTrajectory, WaypointTrajectory>;

inline TrajectorySample sample_trajectory(const Trajectory& trajectory, double t) {
  return std::visit([t](const auto& tr) { return tr.sample(t); }, trajectory);
}

struct Bounds {
  Vec3 min{-2.0, -2.0, 0.0};
  Vec3 max{2.0, 2.0, 3.0};
};

enum MarkerId : int { kFrontMarker = 0, kLeftMarker = 1, kRightMarker = 2 };
inline constexpr int kMarkerCount = 3;

struct Scene {
  Trajectory trajectory = SubcircularTrajectory{};
  // Marker centres in the robot frame (x forward, y left, z up), relative to
  // the pose reference point on the robot's top surface.
  std::array<Vec3, kMarkerCount> marker_layout{Vec3{0.10, 0.0, 0.0}, Vec3{-0.05, 0.08, 0.0},
                                               Vec3{-0.05, -0.08, 0.0}};
  Hsv marker_color{55.0, 0.9, 0.95};
  Hsv front_marker_color{120.0, 0.85, 0.8};
  Hsv background_color{220.0, 0.25, 0.45};
  double marker_radius = 0.03;
  // Robot body: length (x), width (y), height (z); the top sits at the pose height.
  Vec3 body_size{0.50, 0.40, 0.30};
  Bounds volume;

  void validate() const {
    const Vec3 a = marker_layout[1] - marker_layout[0];
    const Vec3 b = marker_layout[2] - marker_layout[0];
    if (0.5 * a.cross(b).norm() < 1e-6) throw Error(ErrorCode::kInvalidInput, "marker layout is collinear");
    if (!(marker_radius > 0.0)) throw Error(ErrorCode::kInvalidInput, "marker_radius must be positive");
    if ((body_size.array() <= 0.0).any()) throw Error(ErrorCode::kInvalidInput, "body_size must be positive");
    if (marker_color == background_color || front_marker_color == background_color) {
      throw Error(ErrorCode::kInvalidInput, "marker colour equals background colour");
    }
  }
};

inline Vec3 robot_to_world(const RobotPose& pose, const Vec3& p) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  return pose.position + Vec3{c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z()};
}

struct GroundTruthEntry {
  std::int64_t frame = 0;
  double time = 0.0;
  RobotPose pose;
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  std::array<Vec3, kMarkerCount> markers{};

  /// Centre of the marker triangle, the reference the tracker estimates.
  Vec3 marker_centroid() const { return (markers[0] + markers[1] + markers[2]) / 3.0; }
};

using GroundTruthLog = std::vector<GroundTruthEntry>;

inline GroundTruthEntry ground_truth_at(const Scene& scene, std::int64_t frame, double dt) {
  GroundTruthEntry gt;
  gt.frame = frame;
  gt.time = static_cast<double>(frame) * dt;
  const TrajectorySample s = sample_trajectory(scene.trajectory, gt.time);
  gt.pose = {s.position, s.yaw};
  gt.velocity = s.velocity;
  gt.acceleration = s.acceleration;
  for (int m = 0; m < kMarkerCount; ++m) gt.markers[m] = robot_to_world(gt.pose, scene.marker_layout[m]);
  return gt;
}

inline void write_ground_truth_csv(std::ostream& os, const GroundTruthLog& log) {
  os.precision(17);
  os << "frame,x,y,z,yaw,front_x,front_y,front_z,left_x,left_y,left_z,right_x,right_y,right_z\n";
  for (const auto& e : log) {
    os << e.frame << ',' << e.pose.position.x() << ',' << e.pose.position.y() << ',' << e.pose.position.z() << ','
       << e.pose.yaw;
    for (const auto& m : e.markers) os << ',' << m.x() << ',' << m.y() << ',' << m.z();
    os << '\n';
  }
}

/// Quantization and useful-range cut of a perturbed depth.
inline double quantized_reading(double z, const DepthLevels& levels) {
  if (!(z > 0.0)) return kInvalidDepth;
  const double q = levels.quantize(z);
  return kUsefulDepth.contains(q) ? q : kInvalidDepth;
}

/// Sensor-side measurement of a true depth: offset, noise, quantization and
/// the useful-range cut. `normal` is a standard normal draw.
inline double measure_depth(double z_true, const SensorProfile& profile, double normal) {
  return quantized_reading(z_true + profile.offset(z_true) + profile.noise_sigma(z_true) * normal, profile.levels);
}

struct FrameOptions {
  bool occlude_markers = false;
};

struct SimulatedFrame {
  DepthFrame depth;
  ColorFrame color;
  GroundTruthEntry truth;
};

/// One simulated RGBD camera watching the scene. Cameras are static, so the
/// floor depth is rendered once; the robot is ray-cast per frame.
class SensorSimulator {
 public:
  SensorSimulator(Scene scene, CameraModel cam, SensorProfile profile, std::uint64_t stream_id = 0, double dt = 1.0 / 30.0)
      : scene_(std::move(scene)), cam_(std::move(cam)), profile_(std::move(profile)), stream_id_(stream_id), dt_(dt) {
    scene_.validate();
    cam_.validate();
    profile_.validate();
    if (!(dt_ > 0.0)) throw Error(ErrorCode::kInvalidInput, "dt must be positive");
    world_to_cam_ = cam_.camera_to_world.inverse();
    floor_depth_ = Grid<double>(cam_.width, cam_.height, kInvalidDepth);
    const Mat3& r = cam_.camera_to_world.rotation();
    const double height = cam_.camera_to_world.translation().z();
    for (int v = 0; v < cam_.height; ++v) {
      for (int u = 0; u < cam_.width; ++u) {
        const Vec3 ray = ray_direction(u, v);
        const double down = r.row(2).dot(ray);
        if (down < 0.0) floor_depth_(u, v) = -height / down;
      }
    }
    // The floor is static: its offset and noise level are fixed per pixel.
    floor_mean_ = Grid<double>(cam_.width, cam_.height, kInvalidDepth);
    floor_sigma_ = Grid<double>(cam_.width, cam_.height, 0.0);
    for (std::size_t i = 0; i < floor_depth_.size(); ++i) {
      const double z = floor_depth_.pixels()[i];
      if (!is_valid_depth(z)) continue;
      floor_mean_.pixels()[i] = z + profile_.offset(z);
      floor_sigma_.pixels()[i] = profile_.noise_sigma(z);
    }
  }

  const CameraModel& camera() const { return cam_; }
  const SensorProfile& profile() const { return profile_; }
  const Scene& scene() const { return scene_; }
  double dt() const { return dt_; }

  /// Noise-free depth (camera-frame z) of the scene at frame t.
  Grid<double> render_true_depth(const RobotPose& pose) const {
    Grid<double> depth = floor_depth_;
    const BoxCast box = prepare_box(pose);
    parallel_rows(cam_.height, [&](int v) {
      if (v < box.v0 || v > box.v1) return;
      for (int u = std::max(box.u0, 0); u <= std::min(box.u1, cam_.width - 1); ++u) {
        const double t = box.intersect(ray_direction(u, v));
        if (t > 0.0) {
          double& z = depth(u, v);
          if (!is_valid_depth(z) || t < z) z = t;
        }
      }
    });
    return depth;
  }

  SimulatedFrame synthesize(std::int64_t t, const FrameOptions& options = {}) const {
    if (t < 0) throw Error(ErrorCode::kInvalidInput, "frame index must be non-negative");
    SimulatedFrame out;
    out.truth = ground_truth_at(scene_, t, dt_);

    out.depth = DepthFrame(cam_.width, cam_.height, t);
    const BoxCast box = prepare_box(out.truth.pose);
    parallel_rows(cam_.height, [&](int v) {
      SplitMix64 rng(stream_seed(profile_.seed, stream_id_, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(v)));
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      boost::random::normal_distribution<double> normal(0.0, 1.0);
      const bool row_in_box = v >= box.v0 && v <= box.v1;
      const int u0 = std::max(box.u0, 0);
      const int u1 = std::min(box.u1, cam_.width - 1);
      auto zout = out.depth.data.row(v);
      for (int u = 0; u < cam_.width; ++u) {
        const auto i = static_cast<std::size_t>(u);
        double hit = -1.0;
        if (row_in_box && u >= u0 && u <= u1) {
          hit = box.intersect(ray_direction(u, v));
          if (hit > 0.0 && is_valid_depth(floor_depth_(u, v)) && floor_depth_(u, v) <= hit) hit = -1.0;
        }
        if (hit <= 0.0 && !is_valid_depth(floor_depth_(u, v))) continue;
        const double drop = uniform(rng);
        const double n = normal(rng);
        if (drop < profile_.dropout_rate) continue;
        if (hit > 0.0) {
          zout[i] = measure_depth(hit, profile_, n);
        } else {
          zout[i] = quantized_reading(floor_mean_(u, v) + floor_sigma_(u, v) * n, profile_.levels);
        }
      }
    });

    out.color = ColorFrame(cam_.width, cam_.height, t, hsv_to_rgb(scene_.background_color));
    if (!options.occlude_markers) {
      for (int m = 0; m < kMarkerCount; ++m) {
        draw_marker(out.color, out.truth.markers[m], m == kFrontMarker ? scene_.front_marker_color : scene_.marker_color);
      }
    }
    return out;
  }

  /// Where the centre of a world point lands in the colour image, if in front.
  std::optional<Vec2> color_pixel_of(const Vec3& world) const {
    const Vec3 p_rgb = transform_point(transform_point(world, world_to_cam_), cam_.ir_to_rgb);
    if (!(p_rgb.z() > 0.0)) return std::nullopt;
    return project(p_rgb, cam_.rgb_projection_intrinsics());
  }

  Vec3 world_to_camera(const Vec3& world) const { return transform_point(world, world_to_cam_); }

 private:
  struct BoxCast {
    Mat3 to_box;  // world -> box-aligned axes
    Vec3 origin;  // camera centre in box coordinates
    Vec3 half;
    Mat3 cam_rot;
    int u0 = 0, u1 = -1, v0 = 0, v1 = -1;

    double intersect(const Vec3& ray_cam) const {
      const Vec3 d = to_box * (cam_rot * ray_cam);
      double t_near = -std::numeric_limits<double>::infinity();
      double t_far = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-15) {
          if (std::abs(origin[i]) > half[i]) return -1.0;
          continue;
        }
        double t1 = (-half[i] - origin[i]) / d[i];
        double t2 = (half[i] - origin[i]) / d[i];
        if (t1 > t2) std::swap(t1, t2);
        t_near = std::max(t_near, t1);
        t_far = std::min(t_far, t2);
        if (t_near > t_far) return -1.0;
      }
      return t_near;
    }
  };

  Vec3 ray_direction(int u, int v) const { return {(u - cam_.ir.cx) / cam_.ir.fx, (v - cam_.ir.cy) / cam_.ir.fy, 1.0}; }

  BoxCast prepare_box(const RobotPose& pose) const {
    BoxCast box;
    box.half = scene_.body_size / 2.0;
    const Vec3 center = pose.position - Vec3{0.0, 0.0, box.half.z()};
    const double c = std::cos(pose.yaw);
    const double s = std::sin(pose.yaw);
    Mat3 yaw;
    yaw << c, -s, 0, s, c, 0, 0, 0, 1;
    box.to_box = yaw.transpose();
    box.cam_rot = cam_.camera_to_world.rotation();
    box.origin = box.to_box * (cam_.camera_to_world.translation() - center);

    // Image-space bounding rectangle of the box corners.
    double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
    bool all_in_front = true;
    for (int i = 0; i < 8; ++i) {
      const Vec3 corner_local{(i & 1 ? 1 : -1) * box.half.x(), (i & 2 ? 1 : -1) * box.half.y(),
                              (i & 4 ? 1 : -1) * box.half.z()};
      const Vec3 p = transform_point(center + yaw * corner_local, world_to_cam_);
      if (!(p.z() > 1e-6)) {
        all_in_front = false;
        break;
      }
      const Vec2 uv = project(p, cam_.ir);
      umin = std::min(umin, uv.x());
      umax = std::max(umax, uv.x());
      vmin = std::min(vmin, uv.y());
      vmax = std::max(vmax, uv.y());
    }
    if (!all_in_front) {
      box.u0 = 0;
      box.u1 = cam_.width - 1;
      box.v0 = 0;
      box.v1 = cam_.height - 1;
    } else {
      box.u0 = static_cast<int>(std::max(std::floor(umin) - 1.0, -1.0));
      box.u1 = static_cast<int>(std::min(std::ceil(umax) + 1.0, static_cast<double>(cam_.width)));
      box.v0 = static_cast<int>(std::max(std::floor(vmin) - 1.0, -1.0));
      box.v1 = static_cast<int>(std::min(std::ceil(vmax) + 1.0, static_cast<double>(cam_.height)));
    }
    return box;
  }

  void draw_marker(ColorFrame& color, const Vec3& world, const Hsv& hsv) const {
    const Vec3 p_rgb = transform_point(transform_point(world, world_to_cam_), cam_.ir_to_rgb);
    if (!(p_rgb.z() > 0.0)) return;
    const Intrinsics& k = cam_.rgb_projection_intrinsics();
    const Vec2 c = project(p_rgb, k);
    const double radius = scene_.marker_radius * k.fx / p_rgb.z();
    const Rgb rgb = hsv_to_rgb(hsv);
    const int v0 = std::max(0, static_cast<int>(std::floor(c.y() - radius)));
    const int v1 = std::min(color.height() - 1, static_cast<int>(std::ceil(c.y() + radius)));
    const int u0 = std::max(0, static_cast<int>(std::floor(c.x() - radius)));
    const int u1 = std::min(color.width() - 1, static_cast<int>(std::ceil(c.x() + radius)));
    const double r2 = radius * radius;
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        if (square(u - c.x()) + square(v - c.y()) <= r2) color.data(u, v) = rgb;
      }
    }
  }

  Scene scene_;
  CameraModel cam_;
  SensorProfile profile_;
  std::uint64_t stream_id_;
  double dt_;
  Extrinsics world_to_cam_;
  Grid<double> floor_depth_;
  Grid<double> floor_mean_;
  Grid<double> floor_sigma_;
};

inline SimulatedFrame synthesize_frame(const Scene& scene, const CameraModel& cam, const SensorProfile& profile,
                                       std::int64_t t, double dt = 1.0 / 30.0, const FrameOptions& options = {}) {
  return SensorSimulator(scene, cam, profile, 0, dt).synthesize(t, options);
}

/// A (reported, reference) depth pair used to fit a correction model.
struct DepthSample {
  double z_sh = 0.0;
  double z_cor = 0.0;
};

/// Calibration readings of targets at known depths drawn uniformly over
/// `range`; readings the sensor reports as invalid are skipped.
inline std::vector<DepthSample> simulate_calibration_samples(const SensorProfile& profile, std::size_t count,
                                                             std::uint64_t seed, DepthRange range = kUsefulDepth) {
  std::mt19937_64 rng(stream_seed(seed, profile.seed, 0xca1b));
  std::uniform_real_distribution<double> depth(range.min, range.max);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  std::vector<DepthSample> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = depth(rng);
    const double reading = measure_depth(z, profile, normal(rng));
    if (is_valid_depth(reading)) samples.push_back({reading, z});
  }
  return samples;
}

}  // namespace rgbdtrack
