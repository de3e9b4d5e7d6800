#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rgbdtrack/camera_geometry.hpp"
#include "rgbdtrack/error.hpp"
#include "rgbdtrack/marker_extraction.hpp"
#include "rgbdtrack/robust_tracker.hpp"

namespace rgbdtrack {

/// One camera's estimate of one point, in world coordinates.
struct SensorEstimate {
  int camera = 0;
  Vec3 x_hat_world = Vec3::Zero();
  Mat3 P = Mat3::Identity();
  Mat3 K_sensor = Mat3::Identity();  // residual sensor error after correction
  double Z_dist = 1.0;               // target-camera distance, m
  bool is_prediction_only = false;

  void validate() const {
    if (!is_positive_definite(P)) throw Error(ErrorCode::kNumerical, "estimate covariance is not positive definite");
    if (!K_sensor.allFinite() || !is_positive_definite(K_sensor)) {
      throw Error(ErrorCode::kInvalidInput, "K_sensor must be positive definite");
    }
    if (!(Z_dist > 0.0)) throw Error(ErrorCode::kInvalidInput, "Z_dist must be positive");
  }
};

struct FusedEstimate {
  Vec3 x_tilde = Vec3::Zero();
  Mat3 P_fused = Mat3::Identity();
  std::vector<double> weights;
};

/// Maps a camera-frame estimate into the world frame: x -> R x + t, P -> R P R^T.
inline SensorEstimate to_world(int camera, const Vec3& x_cam, const Mat3& P_cam, const CameraModel& cam,
                               const Mat3& K_sensor, bool prediction_only = false) {
  const Mat3& r = cam.camera_to_world.rotation();
  SensorEstimate e;
  e.camera = camera;
  e.x_hat_world = transform_point(x_cam, cam.camera_to_world);
  e.P = symmetrized(r * P_cam * r.transpose());
  e.K_sensor = r * K_sensor * r.transpose();
  e.Z_dist = x_cam.norm();
  e.is_prediction_only = prediction_only;
  return e;
}

enum class WeightingMode {
  kNaive,     // omega = 1, un-normalized information sum
  kFast,      // omega ~ trace(P^-1)
  kAdaptive,  // omega from the quality score s = tr(K) + tr(P) + zeta Z
};

/// Which terms enter the adaptive quality score, and how distance is scaled.
struct AdaptiveTerms {
  bool use_p = true;
  bool use_k = true;
  bool use_distance = true;
  // Distance term: kappa * Z^2 (m^2, commensurate with the traces) or, with
  // raw_distance, Z added as is.
  double kappa = 1.0;
  bool raw_distance = false;
};

inline double quality_score(const SensorEstimate& e, const AdaptiveTerms& terms) {
  double s = 0.0;
  if (terms.use_k) s += e.K_sensor.trace();
  if (terms.use_p) s += e.P.trace();
  if (terms.use_distance) s += terms.raw_distance ? e.Z_dist : terms.kappa * e.Z_dist * e.Z_dist;
  return s;
}

/// omega_n = (S - s_n) / ((N - 1) S), S = sum s. Lower score, higher weight.
inline std::vector<double> weights_from_scores(std::span<const double> s) {
  if (s.empty()) throw Error(ErrorCode::kInvalidInput, "no estimates to weight");
  const std::size_t n = s.size();
  if (n == 1) return {1.0};
  double total = 0.0;
  for (double v : s) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "quality scores must be finite and >= 0");
    total += v;
  }
  if (total == 0.0) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  const double denom = static_cast<double>(n - 1) * total;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = (total - s[i]) / denom;
  return w;
}

inline std::vector<double> ci_weights(std::span<const SensorEstimate> estimates, WeightingMode mode,
                                      const AdaptiveTerms& terms = {}) {
  if (estimates.empty()) throw Error(ErrorCode::kInvalidInput, "no estimates to weight");
  for (const auto& e : estimates) e.validate();
  const std::size_t n = estimates.size();
  switch (mode) {
    case WeightingMode::kNaive:
      return std::vector<double>(n, 1.0);
    case WeightingMode::kFast: {
      std::vector<double> info(n);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::FullPivLU<Mat3> lu(estimates[i].P);
        if (!lu.isInvertible()) throw Error(ErrorCode::kNumerical, "singular estimate covariance");
        info[i] = lu.inverse().trace();
        total += info[i];
      }
      for (double& w : info) w /= total;
      return info;
    }
    case WeightingMode::kAdaptive: {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = quality_score(estimates[i], terms);
      return weights_from_scores(s);
    }
  }
  throw Error(ErrorCode::kInvalidInput, "unknown weighting mode");
}

/// P^-1 = sum omega_n P_n^-1, x = P sum omega_n P_n^-1 x_n. With unit
/// weights this is the naive (independent-errors) fusion.
inline FusedEstimate ci_fuse(std::span<const SensorEstimate> estimates, std::span<const double> weights) {
  if (estimates.empty()) throw Error(ErrorCode::kNoOutput, "no estimates to fuse");
  if (weights.size() != estimates.size()) throw Error(ErrorCode::kDimensionMismatch, "one weight per estimate");
  Mat3 info = Mat3::Zero();
  Vec3 info_x = Vec3::Zero();
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw Error(ErrorCode::kInvalidInput, "weights must be non-negative");
    Eigen::FullPivLU<Mat3> lu(estimates[i].P);
    if (!lu.isInvertible()) throw Error(ErrorCode::kNumerical, "singular estimate covariance");
    const Mat3 inv = lu.inverse();
    info += weights[i] * inv;
    info_x += weights[i] * (inv * estimates[i].x_hat_world);
  }
  Eigen::LLT<Mat3> llt(symmetrized(info));
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kNumerical, "singular weighted information sum");
  FusedEstimate out;
  out.P_fused = symmetrized(llt.solve(Mat3::Identity()));
  out.x_tilde = llt.solve(info_x);
  out.weights.assign(weights.begin(), weights.end());
  return out;
}

inline FusedEstimate ci_fuse(std::span<const SensorEstimate> estimates, WeightingMode mode,
                             const AdaptiveTerms& terms = {}) {
  const std::vector<double> w = ci_weights(estimates, mode, terms);
  return ci_fuse(estimates, w);
}

/// Weighted circular mean of angles (radians), in (-pi, pi].
inline double circular_mean(std::span<const double> angles, std::span<const double> weights) {
  double s = 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    s += weights[i] * std::sin(angles[i]);
    c += weights[i] * std::cos(angles[i]);
  }
  return std::atan2(s, c);
}

/// What one camera's trackers deliver for one frame, already in world
/// coordinates. A marker is absent before its tracker has started.
struct CameraFrameEstimate {
  int camera = 0;
  std::array<std::optional<SensorEstimate>, kMarkerCount> markers{};
};

struct FusedFrame {
  std::array<FusedEstimate, kMarkerCount> markers;
  RobotPose pose;
  Mat3 P_position = Mat3::Identity();  // covariance of the marker-centre mean, markers taken independent
  std::vector<int> cameras;            // cameras that contributed
  std::vector<double> camera_weights;  // per camera, mean over its markers
};

/// Fuses each marker across cameras, then recomputes the pose from the fused
/// markers. Yaw is the circular mean of the per-camera yaws with each
/// camera's mean marker weight (cameras missing a marker sit out the yaw).
inline FusedFrame fuse_frame(std::span<const CameraFrameEstimate> cameras, WeightingMode mode,
                             const AdaptiveTerms& terms = {}) {
  FusedFrame out;
  std::vector<int> ids;
  for (const auto& c : cameras) {
    for (const auto& m : c.markers) {
      if (m) {
        ids.push_back(c.camera);
        break;
      }
    }
  }
  if (ids.empty()) throw Error(ErrorCode::kNoOutput, "no camera contributed to this frame");
  std::vector<double> weight_sum(cameras.size(), 0.0);
  std::vector<int> weight_count(cameras.size(), 0);

  MarkerTriple fused_points;
  for (int m = 0; m < kMarkerCount; ++m) {
    std::vector<SensorEstimate> est;
    std::vector<std::size_t> owner;
    for (std::size_t c = 0; c < cameras.size(); ++c) {
      if (cameras[c].markers[m]) {
        est.push_back(*cameras[c].markers[m]);
        owner.push_back(c);
      }
    }
    if (est.empty()) throw Error(ErrorCode::kNoOutput, "a marker has no estimate in this frame");
    out.markers[m] = ci_fuse(est, mode, terms);
    fused_points[m] = out.markers[m].x_tilde;
    for (std::size_t i = 0; i < owner.size(); ++i) {
      weight_sum[owner[i]] += out.markers[m].weights[i];
      ++weight_count[owner[i]];
    }
  }

  const std::optional<RobotPose> pose = compute_pose(fused_points);
  if (!pose) throw Error(ErrorCode::kNoOutput, "fused markers are degenerate");
  out.pose = *pose;
  out.P_position = (out.markers[0].P_fused + out.markers[1].P_fused + out.markers[2].P_fused) / 9.0;

  std::vector<double> yaws;
  std::vector<double> yaw_weights;
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    if (weight_count[c] == 0) continue;
    out.cameras.push_back(cameras[c].camera);
    out.camera_weights.push_back(weight_sum[c] / weight_count[c]);
    MarkerTriple own;
    for (int m = 0; m < kMarkerCount; ++m) {
      if (cameras[c].markers[m]) own[m] = cameras[c].markers[m]->x_hat_world;
    }
    if (const auto p = compute_pose(own)) {
      yaws.push_back(p->yaw);
      yaw_weights.push_back(out.camera_weights.back());
    }
  }
  if (!yaws.empty()) out.pose.yaw = circular_mean(yaws, yaw_weights);
  return out;
}

}  // namespace rgbdtrack
