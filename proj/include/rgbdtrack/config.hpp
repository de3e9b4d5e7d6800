#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rgbdtrack/camera_geometry.hpp"
#include "rgbdtrack/depth_correction.hpp"
#include "rgbdtrack/error.hpp"
#include "rgbdtrack/fusion.hpp"
#include "rgbdtrack/marker_extraction.hpp"
#include "rgbdtrack/pixel_kalman.hpp"
#include "rgbdtrack/robust_tracker.hpp"
#include "rgbdtrack/sensor_simulator.hpp"

namespace rgbdtrack {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct CameraConfig {
  std::string name;
  CameraModel model;
  SensorProfile profile;
};

struct CorrectionConfig {
  bool enabled = true;
  std::size_t samples = 4000;
  int degree = 8;
};

struct PixelFilterConfig {
  bool enabled = true;
  double noise_scale = 1.0;
  PixelKalmanConfig kalman;
};

/// Tracker parameters. Covariances S1, S2 are diagonal with separate
/// position and velocity variances.
struct TrackerConfig {
  double q_accel = 0.6;   // m/s^2
  double r_pos = 0.005;   // m
  double q_floor = 1e-12;
  double theta = 0.1;
  double alpha = 1e5;
  double epsilon = 1e-8;
  double delta_process = 0.0;
  double delta_measurement = 1e-5;
  double s1_position = 1e-2;
  double s1_velocity = 1.0;
  double s2_position = 16.0;
  double s2_velocity = 1.0;
  int max_alpha_doublings = 3;
  RiccatiForm form = RiccatiForm::kConsistent;
  bool missing_uses_f_hat = false;

  MotionModel motion_model(double dt) const { return make_motion_model(dt, q_accel, r_pos, q_floor); }

  RobustParams robust_params(const MotionModel& model) const {
    RobustParams p;
    p.theta = theta;
    p.alpha = alpha;
    p.epsilon = epsilon;
    set_position_uncertainty(p, model, delta_process, delta_measurement);
    p.S1.setZero();
    p.S1.diagonal() << Vec3::Constant(s1_position), Vec3::Constant(s1_velocity);
    p.S2.setZero();
    p.S2.diagonal() << Vec3::Constant(s2_position), Vec3::Constant(s2_velocity);
    p.max_alpha_doublings = max_alpha_doublings;
    p.form = form;
    p.missing_uses_f_hat = missing_uses_f_hat;
    p.validate();
    return p;
  }
};

enum class TrackSource { kRaw, kKalman, kRobust };

struct FusionConfig {
  WeightingMode mode = WeightingMode::kAdaptive;
  TrackSource filter = TrackSource::kRobust;
  double kappa = 1.0;
  bool raw_distance = false;
};

/// Markers of one camera hidden from the colour stream for a frame window.
/// camera < 0 picks the camera closest to the robot at the first frame.
struct OcclusionConfig {
  int camera = -1;
  std::int64_t start = 0;
  std::int64_t frames = 0;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 1;
  std::int64_t frames = 600;
  double dt = 1.0 / 30.0;
  Scene scene;
  std::vector<CameraConfig> cameras;
  CorrectionConfig correction;
  PixelFilterConfig pixel_filter;
  MarkerDetectorConfig detector;
  TrackerConfig tracker;
  FusionConfig fusion;
  OcclusionConfig occlusion;
  std::string output_dir = "out";
  json source;  // the document this config was read from

  void validate() const {
    if (schema_version != kSchemaVersion) {
      throw Error(ErrorCode::kConfig, "schema_version: expected " + std::to_string(kSchemaVersion));
    }
    if (cameras.empty()) throw Error(ErrorCode::kConfig, "cameras: need at least one camera");
    if (frames < 1) throw Error(ErrorCode::kConfig, "frames: must be >= 1");
    if (!(dt > 0.0)) throw Error(ErrorCode::kConfig, "dt: must be positive");
    auto wrap = [](const std::string& field, auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfig, field + ": " + e.what());
      }
    };
    wrap("scene", [&] { scene.validate(); });
    for (std::size_t i = 0; i < cameras.size(); ++i) {
      const std::string f = "cameras[" + std::to_string(i) + "]";
      wrap(f, [&] { cameras[i].model.validate(); });
      wrap(f + ".profile", [&] { cameras[i].profile.validate(); });
    }
    if (correction.degree < 0) throw Error(ErrorCode::kConfig, "correction.degree: must be >= 0");
    if (correction.samples < static_cast<std::size_t>(correction.degree) + 1) {
      throw Error(ErrorCode::kConfig, "correction.samples: fewer than degree + 1");
    }
    if (!(pixel_filter.noise_scale > 0.0)) throw Error(ErrorCode::kConfig, "pixel_filter.noise_scale: must be positive");
    if (!(pixel_filter.kalman.initial_variance > 0.0)) {
      throw Error(ErrorCode::kConfig, "pixel_filter.initial_variance: must be positive");
    }
    wrap("detector.rear_range", [&] { detector.rear_range.validate(); });
    wrap("detector.front_range", [&] { detector.front_range.validate(); });
    if (detector.kernel_radius < 1) throw Error(ErrorCode::kConfig, "detector.kernel_radius: must be >= 1");
    wrap("tracker", [&] { tracker.robust_params(tracker.motion_model(dt)); });
    if (!(fusion.kappa >= 0.0)) throw Error(ErrorCode::kConfig, "fusion.kappa: must be >= 0");
    if (occlusion.frames < 0 || occlusion.start < 0) throw Error(ErrorCode::kConfig, "occlusion: negative window");
    if (occlusion.camera >= static_cast<int>(cameras.size())) {
      throw Error(ErrorCode::kConfig, "occlusion.camera: no such camera");
    }
  }
};

namespace detail {

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorCode::kConfig, path + "." + key + ": unknown field");
  }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path + "." + key + ": " + e.what());
  }
}

inline Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kConfig, path + ": expected [x, y, z]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
}

inline void read_vec3(const json& j, const std::string& path, const char* key, Vec3& out) {
  if (j.contains(key)) out = vec3(j.at(key), path + "." + key);
}

inline Intrinsics intrinsics(const json& j, const std::string& path, Intrinsics k) {
  check_keys(j, path, {"fx", "fy", "cx", "cy"});
  read(j, path, "fx", k.fx);
  read(j, path, "fy", k.fy);
  read(j, path, "cx", k.cx);
  read(j, path, "cy", k.cy);
  return k;
}

inline Mat3 mat3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::kConfig, path + ": expected 3 rows");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3(j[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]");
  return m;
}

inline Extrinsics extrinsics(const json& j, const std::string& path) {
  check_keys(j, path, {"rotation", "translation"});
  Mat3 r = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  if (j.contains("rotation")) r = mat3(j.at("rotation"), path + ".rotation");
  read_vec3(j, path, "translation", t);
  try {
    return Extrinsics(r, t);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
}

inline DepthLevels depth_levels(const json& j, const std::string& path) {
  DepthLevels l;
  check_keys(j, path, {"baseline", "ir_focal", "doff"});
  read(j, path, "baseline", l.baseline);
  read(j, path, "ir_focal", l.ir_focal);
  read(j, path, "doff", l.doff);
  return l;
}

inline SensorProfile sensor_profile(const json& j, const std::string& path) {
  SensorProfile p;
  check_keys(j, path, {"levels", "noise_gap_factor", "noise_poly", "offset_poly", "dropout_rate"});
  if (j.contains("levels")) p.levels = depth_levels(j.at("levels"), path + ".levels");
  read(j, path, "noise_gap_factor", p.noise_gap_factor);
  read(j, path, "noise_poly", p.noise_poly);
  read(j, path, "offset_poly", p.offset_poly);
  read(j, path, "dropout_rate", p.dropout_rate);
  return p;
}

inline Hsv hsv(const json& j, const std::string& path) {
  const Vec3 v = vec3(j, path);
  return {v.x(), v.y(), v.z()};
}

inline Interval interval(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::kConfig, path + ": expected [lo, hi]");
  try {
    return {j[0].get<double>(), j[1].get<double>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
}

inline HsvRange hsv_range(const json& j, const std::string& path, HsvRange r) {
  check_keys(j, path, {"hue", "saturation", "value"});
  if (j.contains("hue")) r.hue = interval(j.at("hue"), path + ".hue");
  if (j.contains("saturation")) r.saturation = interval(j.at("saturation"), path + ".saturation");
  if (j.contains("value")) r.value = interval(j.at("value"), path + ".value");
  return r;
}

inline Scene scene(const json& j, const std::string& path) {
  Scene s;
  check_keys(j, path, {"trajectory", "marker_layout", "marker_color", "front_marker_color", "background_color",
                       "marker_radius", "body_size"});
  if (j.contains("trajectory")) {
    const json& t = j.at("trajectory");
    const std::string tp = path + ".trajectory";
    std::string type = "subcircular";
    read(t, tp, "type", type);
    if (type == "subcircular") {
      check_keys(t, tp, {"type", "center", "radius", "modulation", "lobes", "period", "height", "phase"});
      SubcircularTrajectory c;
      if (t.contains("center")) {
        const json& cj = t.at("center");
        if (!cj.is_array() || cj.size() != 2) throw Error(ErrorCode::kConfig, tp + ".center: expected [x, y]");
        c.center = {cj[0].get<double>(), cj[1].get<double>()};
      }
      read(t, tp, "radius", c.radius);
      read(t, tp, "modulation", c.modulation);
      read(t, tp, "lobes", c.lobes);
      read(t, tp, "period", c.period);
      read(t, tp, "height", c.height);
      read(t, tp, "phase", c.phase);
      if (!(c.radius > 0.0) || !(c.period > 0.0)) throw Error(ErrorCode::kConfig, tp + ": radius and period must be positive");
      s.trajectory = c;
    } else if (type == "waypoints") {
      check_keys(t, tp, {"type", "waypoints", "segment_duration"});
      WaypointTrajectory w;
      if (t.contains("waypoints")) {
        const json& wp = t.at("waypoints");
        for (std::size_t i = 0; i < wp.size(); ++i) w.waypoints.push_back(vec3(wp[i], tp + ".waypoints[" + std::to_string(i) + "]"));
      }
      read(t, tp, "segment_duration", w.segment_duration);
      if (w.waypoints.size() < 2) throw Error(ErrorCode::kConfig, tp + ".waypoints: need at least two");
      if (!(w.segment_duration > 0.0)) throw Error(ErrorCode::kConfig, tp + ".segment_duration: must be positive");
      s.trajectory = w;
    } else {
      throw Error(ErrorCode::kConfig, tp + ".type: expected subcircular or waypoints");
    }
  }
  if (j.contains("marker_layout")) {
    const json& m = j.at("marker_layout");
    if (!m.is_array() || m.size() != kMarkerCount) throw Error(ErrorCode::kConfig, path + ".marker_layout: need 3 points");
    for (int i = 0; i < kMarkerCount; ++i) {
      s.marker_layout[i] = vec3(m[static_cast<std::size_t>(i)], path + ".marker_layout[" + std::to_string(i) + "]");
    }
  }
  if (j.contains("marker_color")) s.marker_color = hsv(j.at("marker_color"), path + ".marker_color");
  if (j.contains("front_marker_color")) s.front_marker_color = hsv(j.at("front_marker_color"), path + ".front_marker_color");
  if (j.contains("background_color")) s.background_color = hsv(j.at("background_color"), path + ".background_color");
  read(j, path, "marker_radius", s.marker_radius);
  read_vec3(j, path, "body_size", s.body_size);
  return s;
}

template <typename Enum>
Enum choice(const json& j, const std::string& path, const char* key, Enum fallback,
            std::initializer_list<std::pair<const char*, Enum>> options) {
  if (!j.contains(key)) return fallback;
  std::string v;
  read(j, path, key, v);
  std::string names;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    names += names.empty() ? name : std::string(" | ") + name;
  }
  throw Error(ErrorCode::kConfig, path + "." + key + ": expected " + names);
}

}  // namespace detail

inline WeightingMode parse_weighting_mode(const std::string& s) {
  if (s == "naive") return WeightingMode::kNaive;
  if (s == "fast") return WeightingMode::kFast;
  if (s == "adaptive") return WeightingMode::kAdaptive;
  throw Error(ErrorCode::kConfig, "mode: expected fast | adaptive | naive");
}

inline TrackSource parse_track_source(const std::string& s) {
  if (s == "raw") return TrackSource::kRaw;
  if (s == "kf") return TrackSource::kKalman;
  if (s == "rf") return TrackSource::kRobust;
  throw Error(ErrorCode::kConfig, "filter: expected kf | rf | raw");
}

inline const char* to_string(TrackSource s) {
  switch (s) {
    case TrackSource::kRaw: return "raw";
    case TrackSource::kKalman: return "kf";
    case TrackSource::kRobust: return "rf";
  }
  return "?";
}

inline ScenarioConfig parse_scenario(const json& j) {
  using namespace detail;
  ScenarioConfig c;
  c.source = j;
  check_keys(j, "config", {"schema_version", "seed", "frames", "dt", "scene", "camera_defaults", "profiles", "cameras",
                           "correction", "pixel_filter", "detector", "tracker", "fusion", "occlusion", "output_dir"});
  if (!j.contains("schema_version")) throw Error(ErrorCode::kConfig, "schema_version: missing");
  read(j, "config", "schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    throw Error(ErrorCode::kConfig, "schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                                        std::to_string(c.schema_version));
  }
  read(j, "config", "seed", c.seed);
  read(j, "config", "frames", c.frames);
  read(j, "config", "dt", c.dt);
  read(j, "config", "output_dir", c.output_dir);
  if (j.contains("scene")) c.scene = scene(j.at("scene"), "scene");

  CameraModel base;
  base.ir = {580.0, 580.0, 319.5, 239.5};
  base.rgb = {525.0, 525.0, 319.5, 239.5};
  base.ir_to_rgb = Extrinsics(Mat3::Identity(), Vec3{-0.025, 0.0, 0.0});
  if (j.contains("camera_defaults")) {
    const json& d = j.at("camera_defaults");
    check_keys(d, "camera_defaults", {"ir", "rgb", "ir_to_rgb", "rgb_projection_uses_ir_intrinsics"});
    if (d.contains("ir")) base.ir = intrinsics(d.at("ir"), "camera_defaults.ir", base.ir);
    if (d.contains("rgb")) base.rgb = intrinsics(d.at("rgb"), "camera_defaults.rgb", base.rgb);
    if (d.contains("ir_to_rgb")) base.ir_to_rgb = extrinsics(d.at("ir_to_rgb"), "camera_defaults.ir_to_rgb");
    read(d, "camera_defaults", "rgb_projection_uses_ir_intrinsics", base.rgb_projection_uses_ir_intrinsics);
  }

  const json profiles = j.value("profiles", json::object());
  if (!profiles.is_object()) throw Error(ErrorCode::kConfig, "profiles: expected an object");
  if (!j.contains("cameras") || !j.at("cameras").is_array()) throw Error(ErrorCode::kConfig, "cameras: expected an array");
  const json& cams = j.at("cameras");
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const std::string path = "cameras[" + std::to_string(i) + "]";
    const json& cj = cams[i];
    check_keys(cj, path, {"name", "eye", "target", "camera_to_world", "ir", "rgb", "profile"});
    CameraConfig cam;
    cam.name = "cam" + std::to_string(i);
    read(cj, path, "name", cam.name);
    cam.model = base;
    if (cj.contains("ir")) cam.model.ir = intrinsics(cj.at("ir"), path + ".ir", cam.model.ir);
    if (cj.contains("rgb")) cam.model.rgb = intrinsics(cj.at("rgb"), path + ".rgb", cam.model.rgb);
    if (cj.contains("camera_to_world")) {
      cam.model.camera_to_world = extrinsics(cj.at("camera_to_world"), path + ".camera_to_world");
    } else if (cj.contains("eye")) {
      const Vec3 eye = vec3(cj.at("eye"), path + ".eye");
      Vec3 target = Vec3::Zero();
      read_vec3(cj, path, "target", target);
      try {
        cam.model.camera_to_world = look_at(eye, target);
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfig, path + ": " + e.what());
      }
    } else {
      throw Error(ErrorCode::kConfig, path + ": needs eye/target or camera_to_world");
    }
    if (!cj.contains("profile")) throw Error(ErrorCode::kConfig, path + ".profile: missing");
    const json& pj = cj.at("profile");
    if (pj.is_string()) {
      const std::string name = pj.get<std::string>();
      if (!profiles.contains(name)) throw Error(ErrorCode::kConfig, path + ".profile: unknown profile '" + name + "'");
      cam.profile = sensor_profile(profiles.at(name), "profiles." + name);
    } else {
      cam.profile = sensor_profile(pj, path + ".profile");
    }
    cam.profile.seed = c.seed;
    c.cameras.push_back(std::move(cam));
  }

  if (j.contains("correction")) {
    const json& s = j.at("correction");
    check_keys(s, "correction", {"enabled", "samples", "degree"});
    read(s, "correction", "enabled", c.correction.enabled);
    read(s, "correction", "samples", c.correction.samples);
    read(s, "correction", "degree", c.correction.degree);
  }
  if (j.contains("pixel_filter")) {
    const json& s = j.at("pixel_filter");
    check_keys(s, "pixel_filter", {"enabled", "noise_scale", "initial_variance", "reset_after", "process_noise"});
    read(s, "pixel_filter", "enabled", c.pixel_filter.enabled);
    read(s, "pixel_filter", "noise_scale", c.pixel_filter.noise_scale);
    read(s, "pixel_filter", "initial_variance", c.pixel_filter.kalman.initial_variance);
    read(s, "pixel_filter", "reset_after", c.pixel_filter.kalman.reset_after);
    c.pixel_filter.kalman.process_noise =
        choice(s, "pixel_filter", "process_noise", c.pixel_filter.kalman.process_noise,
               {{"none", PixelProcessNoise::kNone}, {"level_gap", PixelProcessNoise::kLevelGap}});
  }
  if (j.contains("detector")) {
    const json& s = j.at("detector");
    check_keys(s, "detector", {"rear_range", "front_range", "kernel_radius", "min_area", "depth_window_gaps"});
    if (s.contains("rear_range")) c.detector.rear_range = hsv_range(s.at("rear_range"), "detector.rear_range", c.detector.rear_range);
    if (s.contains("front_range")) {
      c.detector.front_range = hsv_range(s.at("front_range"), "detector.front_range", c.detector.front_range);
    }
    read(s, "detector", "kernel_radius", c.detector.kernel_radius);
    read(s, "detector", "min_area", c.detector.min_area);
    read(s, "detector", "depth_window_gaps", c.detector.depth_window_gaps);
  }
  if (j.contains("tracker")) {
    const json& s = j.at("tracker");
    TrackerConfig& t = c.tracker;
    check_keys(s, "tracker", {"q_accel", "r_pos", "q_floor", "theta", "alpha", "epsilon", "delta_process",
                              "delta_measurement", "s1_position", "s1_velocity", "s2_position", "s2_velocity",
                              "max_alpha_doublings", "riccati_form", "missing_uses_f_hat"});
    read(s, "tracker", "q_accel", t.q_accel);
    read(s, "tracker", "r_pos", t.r_pos);
    read(s, "tracker", "q_floor", t.q_floor);
    read(s, "tracker", "theta", t.theta);
    read(s, "tracker", "alpha", t.alpha);
    read(s, "tracker", "epsilon", t.epsilon);
    read(s, "tracker", "delta_process", t.delta_process);
    read(s, "tracker", "delta_measurement", t.delta_measurement);
    read(s, "tracker", "s1_position", t.s1_position);
    read(s, "tracker", "s1_velocity", t.s1_velocity);
    read(s, "tracker", "s2_position", t.s2_position);
    read(s, "tracker", "s2_velocity", t.s2_velocity);
    read(s, "tracker", "max_alpha_doublings", t.max_alpha_doublings);
    read(s, "tracker", "missing_uses_f_hat", t.missing_uses_f_hat);
    t.form = choice(s, "tracker", "riccati_form", t.form,
                    {{"consistent", RiccatiForm::kConsistent}, {"printed", RiccatiForm::kPrinted}});
  }
  if (j.contains("fusion")) {
    const json& s = j.at("fusion");
    check_keys(s, "fusion", {"mode", "filter", "kappa", "raw_distance"});
    c.fusion.mode = choice(s, "fusion", "mode", c.fusion.mode,
                           {{"naive", WeightingMode::kNaive}, {"fast", WeightingMode::kFast},
                            {"adaptive", WeightingMode::kAdaptive}});
    c.fusion.filter = choice(s, "fusion", "filter", c.fusion.filter,
                             {{"raw", TrackSource::kRaw}, {"kf", TrackSource::kKalman}, {"rf", TrackSource::kRobust}});
    read(s, "fusion", "kappa", c.fusion.kappa);
    read(s, "fusion", "raw_distance", c.fusion.raw_distance);
  }
  if (j.contains("occlusion")) {
    const json& s = j.at("occlusion");
    check_keys(s, "occlusion", {"camera", "start", "frames"});
    read(s, "occlusion", "camera", c.occlusion.camera);
    read(s, "occlusion", "start", c.occlusion.start);
    read(s, "occlusion", "frames", c.occlusion.frames);
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  return parse_scenario(j);
}

// Correction model files and calibration sample CSVs.

inline json correction_to_json(const CorrectionModel& m) {
  const auto& p = m.polynomial();
  return {{"coefficients", p.coefficients},
          {"center", p.center},
          {"half_width", p.half_width},
          {"support", {m.support().min, m.support().max}},
          {"valid_range", {m.valid_range().min, m.valid_range().max}},
          {"fit_rms", m.fit_rms()},
          {"levels", {{"baseline", m.levels().baseline}, {"ir_focal", m.levels().ir_focal}, {"doff", m.levels().doff}}}};
}

inline CorrectionModel correction_from_json(const json& j) {
  using namespace detail;
  check_keys(j, "model", {"coefficients", "center", "half_width", "support", "valid_range", "fit_rms", "levels"});
  ScaledPolynomial p;
  read(j, "model", "coefficients", p.coefficients);
  read(j, "model", "center", p.center);
  read(j, "model", "half_width", p.half_width);
  if (p.coefficients.empty() || !(p.half_width > 0.0)) throw Error(ErrorCode::kConfig, "model: invalid polynomial");
  const Interval support = j.contains("support") ? interval(j.at("support"), "model.support") : Interval{0.8, 4.5};
  const Interval valid = j.contains("valid_range") ? interval(j.at("valid_range"), "model.valid_range") : Interval{0.8, 4.5};
  double fit_rms = 0.0;
  read(j, "model", "fit_rms", fit_rms);
  const DepthLevels levels = j.contains("levels") ? depth_levels(j.at("levels"), "model.levels") : DepthLevels{};
  return CorrectionModel(std::move(p), {support.lo, support.hi}, levels, fit_rms, {valid.lo, valid.hi});
}

inline void write_samples_csv(std::ostream& os, std::span<const DepthSample> samples) {
  os.precision(17);
  os << "z_sh,z_cor\n";
  for (const auto& s : samples) os << s.z_sh << ',' << s.z_cor << '\n';
}

inline std::vector<DepthSample> read_samples_csv(std::istream& is) {
  std::vector<DepthSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.find("z_sh") != std::string::npos) continue;
    std::istringstream ss(line);
    DepthSample s;
    char comma = 0;
    if (!(ss >> s.z_sh >> comma >> s.z_cor) || comma != ',') {
      throw Error(ErrorCode::kInvalidInput, "samples line " + std::to_string(lineno) + ": expected z_sh,z_cor");
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace rgbdtrack
