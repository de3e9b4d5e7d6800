#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "rgbdtrack/camera_geometry.hpp"
#include "rgbdtrack/config.hpp"
#include "rgbdtrack/depth_correction.hpp"
#include "rgbdtrack/fusion.hpp"
#include "rgbdtrack/marker_extraction.hpp"
#include "rgbdtrack/pixel_kalman.hpp"
#include "rgbdtrack/robust_tracker.hpp"
#include "rgbdtrack/sensor_simulator.hpp"

namespace rgbdtrack {

struct PoseEstimate {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double trace_P = 0.0;
  bool prediction_only = false;
};

using PoseTrack = std::vector<std::optional<PoseEstimate>>;

struct RmsResult {
  Vec3 axis = Vec3::Zero();
  double overall = 0.0;
  std::size_t frames = 0;    // frames that entered the mean
  std::size_t excluded = 0;  // frames without an estimate (or outside the mask)
};

/// Per-axis and overall RMS of `track` against the truth reference point.
/// `mask`, when given, restricts the frames considered.
inline RmsResult compute_rms(std::span<const std::optional<Vec3>> track, const GroundTruthLog& truth,
                             std::span<const std::uint8_t> mask = {}) {
  if (track.size() != truth.size()) throw Error(ErrorCode::kDimensionMismatch, "trajectory and truth lengths differ");
  if (!mask.empty() && mask.size() != track.size()) throw Error(ErrorCode::kDimensionMismatch, "mask length differs");
  RmsResult r;
  Vec3 sse = Vec3::Zero();
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (!track[i] || (!mask.empty() && !mask[i])) {
      ++r.excluded;
      continue;
    }
    sse += (*track[i] - truth[i].pose.position).cwiseAbs2();
    ++r.frames;
  }
  if (r.frames == 0) throw Error(ErrorCode::kNoOutput, "no overlap between trajectory and truth");
  const Vec3 mse = sse / static_cast<double>(r.frames);
  r.axis = mse.cwiseSqrt();
  r.overall = std::sqrt(mse.sum());
  return r;
}

inline std::vector<std::optional<Vec3>> positions(const PoseTrack& track) {
  std::vector<std::optional<Vec3>> out(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (track[i]) out[i] = track[i]->position;
  }
  return out;
}

inline RmsResult compute_rms(const PoseTrack& track, const GroundTruthLog& truth, std::span<const std::uint8_t> mask = {}) {
  const auto p = positions(track);
  return compute_rms(std::span<const std::optional<Vec3>>(p), truth, mask);
}

/// Fused output labels. "fast" weighs by the estimate covariance only,
/// "adaptive_pk" uses the adaptive score without the distance term.
struct FusionVariant {
  const char* name;
  WeightingMode mode;
  AdaptiveTerms terms;
};

inline std::vector<FusionVariant> fusion_variants(const FusionConfig& f) {
  AdaptiveTerms full{true, true, true, f.kappa, f.raw_distance};
  AdaptiveTerms pk{true, true, false, f.kappa, f.raw_distance};
  return {{"naive", WeightingMode::kNaive, full},
          {"fast", WeightingMode::kFast, full},
          {"adaptive_pk", WeightingMode::kAdaptive, pk},
          {"adaptive", WeightingMode::kAdaptive, full}};
}

inline const char* mode_name(WeightingMode m) {
  switch (m) {
    case WeightingMode::kNaive: return "naive";
    case WeightingMode::kFast: return "fast";
    case WeightingMode::kAdaptive: return "adaptive";
  }
  return "?";
}

struct CameraRun {
  std::string name;
  CorrectionModel correction;
  double sensor_rms = 0.0;  // residual depth error after correction, from calibration samples
  std::array<PoseTrack, 3> tracks;  // indexed by TrackSource
  std::vector<std::uint8_t> support;  // frames with a raw pose
  std::array<RmsResult, 3> rms;
  std::size_t frames_with_all_markers = 0;
  int alpha_doublings = 0;

  const PoseTrack& track(TrackSource s) const { return tracks[static_cast<std::size_t>(s)]; }
};

struct FusedRun {
  std::string mode;
  TrackSource filter = TrackSource::kRobust;
  PoseTrack track;
  std::vector<std::vector<double>> weights;  // per frame, per camera (NaN when absent)
  RmsResult rms;
};

struct RunReport {
  std::vector<CameraRun> cameras;
  std::vector<FusedRun> fused;
  RmsResult overall;  // the configured fusion mode and filter
  std::string primary_mode;
  TrackSource primary_filter = TrackSource::kRobust;
  std::int64_t occluded_camera = -1;
  double fps = 0.0;
  double seconds = 0.0;

  const FusedRun& fused_run(const std::string& mode, TrackSource filter) const {
    for (const auto& f : fused) {
      if (f.mode == mode && f.filter == filter) return f;
    }
    throw Error(ErrorCode::kInvalidInput, "no fused run " + mode);
  }
};

struct ScenarioResult {
  ScenarioConfig config;
  GroundTruthLog truth;
  RunReport report;
};

/// Per-camera measurement pipeline: reliability cut, correction, per-pixel
/// filter, registration and marker extraction. Tracking runs afterwards on
/// the extracted marker positions.
class CameraPipeline {
 public:
  CameraPipeline(const ScenarioConfig& cfg, std::size_t index)
      : cfg_(&cfg), cam_(cfg.cameras[index]), sim_(cfg.scene, cam_.model, cam_.profile, index, cfg.dt) {
    const auto samples = simulate_calibration_samples(cam_.profile, cfg.correction.samples, stream_seed(cfg.seed, index));
    if (cfg.correction.enabled) {
      correction_ = fit_correction(samples, cam_.profile.levels, cfg.correction.degree);
      sensor_rms_ = correction_.fit_rms();
    } else {
      correction_ = CorrectionModel::identity(cam_.profile.levels);
      double sse = 0.0;
      for (const auto& s : samples) sse += square(s.z_sh - s.z_cor);
      sensor_rms_ = std::sqrt(sse / static_cast<double>(samples.size()));
    }
    sensor_rms_ = std::max(sensor_rms_, 1e-6);
    pixel_ = PixelKalmanGrid(cam_.model.width, cam_.model.height,
                             DepthNoiseModel{cam_.profile.levels, cfg.pixel_filter.noise_scale}, cfg.pixel_filter.kalman);
  }

  /// Marker positions (camera frame) seen in frame t.
  MarkerTriple measure(std::int64_t t, bool occluded) {
    const SimulatedFrame frame = sim_.synthesize(t, FrameOptions{occluded});
    const DepthFrame depth = filtered_depth(frame.depth);
    const PointCloud cloud = register_frame(depth, frame.color, cam_.model);
    return detect_markers(frame.color, cloud, cam_.model, cam_.profile.levels, cfg_->detector).positions();
  }

  /// The per-pixel stages alone: reliability cut, correction, pixel filter.
  /// Same result as filter_unreliable, apply_correction and
  /// PixelKalmanGrid::filter_frame in sequence, in a single pass.
  DepthFrame filtered_depth(const DepthFrame& raw) {
    const bool correct = cfg_->correction.enabled;
    auto pre = [&](double z) {
      if (!is_valid_depth(z)) return z;
      if (!kUsefulDepth.contains(z)) return kInvalidDepth;
      return correct ? correction_.correct_level(z) : z;
    };
    if (cfg_->pixel_filter.enabled) return pixel_.filter_frame(raw, pre);
    DepthFrame out = raw;
    parallel_rows(out.height(), [&](int v) {
      for (double& z : out.data.row(v)) z = pre(z);
    });
    return out;
  }

  const CameraConfig& camera() const { return cam_; }
  const SensorSimulator& simulator() const { return sim_; }
  const CorrectionModel& correction() const { return correction_; }
  double sensor_rms() const { return sensor_rms_; }

 private:
  const ScenarioConfig* cfg_;
  CameraConfig cam_;
  SensorSimulator sim_;
  CorrectionModel correction_;
  double sensor_rms_ = 0.0;
  PixelKalmanGrid pixel_;
};

/// Everything one camera's measurement pipeline produced over a run.
struct CameraMeasurements {
  std::string name;
  CorrectionModel correction;
  double sensor_rms = 0.0;
  std::vector<MarkerTriple> markers;  // per frame, camera frame
};

namespace detail {

inline std::optional<PoseEstimate> world_pose(const std::array<std::optional<SensorEstimate>, kMarkerCount>& m,
                                              bool prediction_only) {
  MarkerTriple w;
  Mat3 p = Mat3::Zero();
  for (int i = 0; i < kMarkerCount; ++i) {
    if (!m[i]) return std::nullopt;
    w[i] = m[i]->x_hat_world;
    p += m[i]->P;
  }
  const auto pose = compute_pose(w);
  if (!pose) return std::nullopt;
  return PoseEstimate{pose->position, pose->yaw, p.trace() / 9.0, prediction_only};
}

}  // namespace detail

inline GroundTruthLog ground_truth(const ScenarioConfig& cfg) {
  GroundTruthLog truth;
  truth.reserve(static_cast<std::size_t>(cfg.frames));
  for (std::int64_t t = 0; t < cfg.frames; ++t) truth.push_back(ground_truth_at(cfg.scene, t, cfg.dt));
  return truth;
}

/// Camera whose markers are hidden during the occlusion window, or -1.
/// With camera < 0 in the config, the camera closest to the robot at the
/// start of the window.
inline std::int64_t occluded_camera(const ScenarioConfig& cfg, const GroundTruthLog& truth) {
  if (cfg.occlusion.frames <= 0) return -1;
  if (cfg.occlusion.camera >= 0) return cfg.occlusion.camera;
  const auto& at = truth[std::min<std::size_t>(static_cast<std::size_t>(cfg.occlusion.start), truth.size() - 1)];
  std::int64_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cfg.cameras.size(); ++i) {
    const double d = (cfg.cameras[i].model.camera_to_world.translation() - at.pose.position).norm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::int64_t>(i);
    }
  }
  return best;
}

/// Runs the measurement pipelines of all cameras over all frames. Cameras
/// run concurrently; each is sequential in time.
inline std::vector<CameraMeasurements> measure_cameras(const ScenarioConfig& cfg, std::int64_t occluded = -1) {
  const std::size_t n_cam = cfg.cameras.size();
  std::vector<CameraMeasurements> out(n_cam);
  tbb::parallel_for(std::size_t{0}, n_cam, [&](std::size_t c) {
    CameraPipeline pipe(cfg, c);
    CameraMeasurements& m = out[c];
    m.name = cfg.cameras[c].name;
    m.correction = pipe.correction();
    m.sensor_rms = pipe.sensor_rms();
    m.markers.resize(static_cast<std::size_t>(cfg.frames));
    for (std::int64_t t = 0; t < cfg.frames; ++t) {
      const bool hidden = static_cast<std::int64_t>(c) == occluded && t >= cfg.occlusion.start &&
                          t < cfg.occlusion.start + cfg.occlusion.frames;
      m.markers[static_cast<std::size_t>(t)] = pipe.measure(t, hidden);
    }
  });
  return out;
}

/// Tracks every marker of every camera with both filters, scores the
/// per-camera poses, and fuses per frame with all weighting variants for all
/// three track sources.
inline RunReport track_and_fuse(const ScenarioConfig& cfg, const GroundTruthLog& truth,
                                std::span<const CameraMeasurements> measurements) {
  const std::size_t n_cam = measurements.size();
  const std::size_t n_frames = truth.size();
  const MotionModel model = cfg.tracker.motion_model(cfg.dt);
  const RobustParams params = cfg.tracker.robust_params(model);
  RunReport rep;

  // World-frame per-marker estimates, indexed [source][camera][frame].
  using MarkerSet = std::array<std::optional<SensorEstimate>, kMarkerCount>;
  std::array<std::vector<std::vector<MarkerSet>>, 3> per_cam;
  for (auto& s : per_cam) s.assign(n_cam, std::vector<MarkerSet>(n_frames));
  std::vector<std::vector<std::uint8_t>> pred_only(n_cam, std::vector<std::uint8_t>(n_frames, 0));
  std::vector<int> doublings(n_cam, 0);

  tbb::parallel_for(std::size_t{0}, n_cam, [&](std::size_t c) {
    const CameraModel& cam = cfg.cameras[c].model;
    const Mat3 K_sensor = square(measurements[c].sensor_rms) * Mat3::Identity();
    const int id = static_cast<int>(c);
    std::array<std::optional<MarkerTracker>, kMarkerCount> trackers;
    for (auto& t : trackers) t.emplace(model, params);
    for (std::size_t t = 0; t < n_frames; ++t) {
      const MarkerTriple& raw = measurements[c].markers[t];
      bool all_pred = true;
      for (int m = 0; m < kMarkerCount; ++m) {
        const auto out = trackers[m]->step(raw[m]);
        if (raw[m]) per_cam[0][c][t][m] = to_world(id, *raw[m], model.R, cam, K_sensor);
        if (const auto& k = out.kalman) per_cam[1][c][t][m] = to_world(id, k->position, k->P, cam, K_sensor, k->prediction_only);
        if (const auto& r = out.robust) {
          per_cam[2][c][t][m] = to_world(id, r->position, r->P, cam, K_sensor, r->prediction_only);
          all_pred = all_pred && r->prediction_only;
        }
      }
      pred_only[c][t] = all_pred ? 1 : 0;
    }
    for (const auto& t : trackers) {
      if (t->robust()) doublings[c] = std::max(doublings[c], t->robust()->alpha_doublings());
    }
  });

  rep.cameras.resize(n_cam);
  for (std::size_t c = 0; c < n_cam; ++c) {
    CameraRun& run = rep.cameras[c];
    run.name = measurements[c].name;
    run.correction = measurements[c].correction;
    run.sensor_rms = measurements[c].sensor_rms;
    run.alpha_doublings = doublings[c];
    run.support.assign(n_frames, 0);
    for (int s = 0; s < 3; ++s) {
      run.tracks[s].resize(n_frames);
      for (std::size_t t = 0; t < n_frames; ++t) {
        run.tracks[s][t] = detail::world_pose(per_cam[s][c][t], s != 0 && pred_only[c][t]);
      }
    }
    for (std::size_t t = 0; t < n_frames; ++t) {
      run.support[t] = run.tracks[0][t].has_value() ? 1 : 0;
      run.frames_with_all_markers += run.support[t];
    }
    // Filters are scored on the frames where the raw pose exists.
    if (run.frames_with_all_markers > 0) {
      for (int s = 0; s < 3; ++s) run.rms[s] = compute_rms(run.tracks[s], truth, run.support);
    }
  }

  for (int s = 0; s < 3; ++s) {
    for (const auto& variant : fusion_variants(cfg.fusion)) {
      FusedRun fr;
      fr.mode = variant.name;
      fr.filter = static_cast<TrackSource>(s);
      fr.track.resize(n_frames);
      fr.weights.assign(n_frames, std::vector<double>(n_cam, std::numeric_limits<double>::quiet_NaN()));
      for (std::size_t t = 0; t < n_frames; ++t) {
        std::vector<CameraFrameEstimate> inputs;
        std::array<bool, kMarkerCount> covered{};
        for (std::size_t c = 0; c < n_cam; ++c) {
          CameraFrameEstimate e;
          e.camera = static_cast<int>(c);
          e.markers = per_cam[s][c][t];
          bool any = false;
          for (int m = 0; m < kMarkerCount; ++m) {
            covered[m] = covered[m] || e.markers[m].has_value();
            any = any || e.markers[m].has_value();
          }
          if (any) inputs.push_back(e);
        }
        // No output for this frame unless every marker has an estimate.
        if (!covered[0] || !covered[1] || !covered[2]) continue;
        const FusedFrame f = fuse_frame(inputs, variant.mode, variant.terms);
        fr.track[t] = PoseEstimate{f.pose.position, f.pose.yaw, f.P_position.trace(), false};
        for (std::size_t i = 0; i < f.cameras.size(); ++i) {
          fr.weights[t][static_cast<std::size_t>(f.cameras[i])] = f.camera_weights[i];
        }
      }
      bool any = false;
      for (const auto& p : fr.track) any = any || p.has_value();
      if (any) fr.rms = compute_rms(fr.track, truth);
      rep.fused.push_back(std::move(fr));
    }
  }

  rep.primary_mode = mode_name(cfg.fusion.mode);
  rep.primary_filter = cfg.fusion.filter;
  rep.overall = rep.fused_run(rep.primary_mode, rep.primary_filter).rms;
  return rep;
}

/// The whole pipeline for one config. Deterministic for a fixed config:
/// noise streams are keyed by (seed, camera, frame, row).
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioResult result;
  result.config = cfg;
  result.truth = ground_truth(cfg);
  const std::int64_t occluded = occluded_camera(cfg, result.truth);
  const auto measurements = measure_cameras(cfg, occluded);
  result.report = track_and_fuse(cfg, result.truth, measurements);
  result.report.occluded_camera = occluded;
  result.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.report.fps = static_cast<double>(cfg.frames) / result.report.seconds;
  return result;
}

// --------------------------------------------------------------------------
// Output files

inline json rms_json(const RmsResult& r) {
  return {{"x", r.axis.x()}, {"y", r.axis.y()}, {"z", r.axis.z()}, {"overall", r.overall},
          {"frames", r.frames}, {"excluded", r.excluded}};
}

inline json report_json(const ScenarioResult& res) {
  const RunReport& rep = res.report;
  json cams = json::array();
  for (const auto& c : rep.cameras) {
    json cj = {{"name", c.name},
               {"sensor_rms", c.sensor_rms},
               {"frames_with_all_markers", c.frames_with_all_markers},
               {"alpha_doublings", c.alpha_doublings}};
    if (c.frames_with_all_markers > 0) {
      cj["raw"] = rms_json(c.rms[0]);
      cj["kf"] = rms_json(c.rms[1]);
      cj["rf"] = rms_json(c.rms[2]);
    }
    cams.push_back(cj);
  }
  json fused = json::object();
  for (const auto& f : rep.fused) fused[std::string(to_string(f.filter))][f.mode] = rms_json(f.rms);
  return {{"schema_version", kSchemaVersion},
          {"seed", res.config.seed},
          {"frames", res.config.frames},
          {"cameras", cams},
          {"fused", fused},
          {"overall", rms_json(rep.overall)},
          {"primary", {{"mode", rep.primary_mode}, {"filter", to_string(rep.primary_filter)}}},
          {"occluded_camera", rep.occluded_camera},
          {"fps", rep.fps},
          {"seconds", rep.seconds},
          {"config", res.config.source}};
}

namespace detail {

inline void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace detail

/// Per-camera tracks: one row per frame and source where a pose exists.
/// `scored` marks the frames used in the per-camera RMS.
inline void write_trajectory_csv(std::ostream& os, const RunReport& rep) {
  os << "frame,source,filter,x,y,z,yaw,trace_P,scored\n";
  for (const auto& c : rep.cameras) {
    for (int s = 0; s < 3; ++s) {
      for (std::size_t t = 0; t < c.tracks[s].size(); ++t) {
        const auto& p = c.tracks[s][t];
        if (!p) continue;
        os << t << ',' << c.name << ',' << to_string(static_cast<TrackSource>(s));
        for (double v : {p->position.x(), p->position.y(), p->position.z(), p->yaw, p->trace_P}) {
          os << ',';
          detail::put(os, v);
        }
        os << ',' << (c.support[t] ? 1 : 0) << '\n';
      }
    }
  }
}

inline void write_fused_csv(std::ostream& os, const RunReport& rep) {
  os << "frame,mode,filter,x,y,z,yaw,trace_P";
  for (const auto& c : rep.cameras) os << ",w_" << c.name;
  os << '\n';
  for (const auto& f : rep.fused) {
    for (std::size_t t = 0; t < f.track.size(); ++t) {
      const auto& p = f.track[t];
      if (!p) continue;
      os << t << ',' << f.mode << ',' << to_string(f.filter);
      for (double v : {p->position.x(), p->position.y(), p->position.z(), p->yaw, p->trace_P}) {
        os << ',';
        detail::put(os, v);
      }
      for (double w : f.weights[t]) {
        os << ',';
        if (!std::isnan(w)) detail::put(os, w);
      }
      os << '\n';
    }
  }
}

inline void write_outputs(const ScenarioResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw Error(ErrorCode::kInvalidInput, "cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("trajectory.csv");
    write_trajectory_csv(f, res.report);
  }
  {
    auto f = open("fused.csv");
    write_fused_csv(f, res.report);
  }
  {
    auto f = open("ground_truth.csv");
    write_ground_truth_csv(f, res.truth);
  }
  {
    auto f = open("report.json");
    f << report_json(res).dump(2) << '\n';
  }
}

// --------------------------------------------------------------------------
// Throughput of the per-pixel stages.

inline constexpr double kReferenceFps = 25.0;

struct BenchmarkRow {
  int threads = 1;
  double fps = 0.0;  // synchronized multi-camera frames per second (median run)
  std::vector<double> run_fps;
};

struct BenchmarkResult {
  int cameras = 0;
  int frames_per_run = 0;
  std::size_t points_registered = 0;  // consumed so the timed work is not optimized away
  std::vector<BenchmarkRow> rows;

  double speedup(int threads) const {
    double base = 0.0;
    double at = 0.0;
    for (const auto& r : rows) {
      if (r.threads == 1) base = r.fps;
      if (r.threads == threads) at = r.fps;
    }
    return base > 0.0 ? at / base : 0.0;
  }
};

inline unsigned hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Times correction + pixel filter + registration over `frames` synthetic
/// frames for every camera of the config, for each thread count. Frames are
/// synthesized once up front and are not part of the timing.
inline BenchmarkResult benchmark(const ScenarioConfig& cfg, std::span<const int> thread_counts, int frames = 4,
                                 int runs = 5) {
  if (frames < 1 || runs < 1) throw Error(ErrorCode::kInvalidInput, "frames and runs must be positive");
  BenchmarkResult result;
  result.cameras = static_cast<int>(cfg.cameras.size());
  result.frames_per_run = frames;

  std::vector<std::unique_ptr<CameraPipeline>> pipes;
  std::vector<std::vector<SimulatedFrame>> input(cfg.cameras.size());
  for (std::size_t c = 0; c < cfg.cameras.size(); ++c) {
    pipes.push_back(std::make_unique<CameraPipeline>(cfg, c));
    for (int t = 0; t < frames; ++t) input[c].push_back(pipes[c]->simulator().synthesize(t));
  }

  for (int threads : thread_counts) {
    if (threads < 1) throw Error(ErrorCode::kInvalidInput, "thread counts must be positive");
    tbb::task_arena arena(threads);
    BenchmarkRow row;
    row.threads = threads;
    for (int r = 0; r < runs; ++r) {
      std::vector<CameraPipeline> local;
      for (std::size_t c = 0; c < cfg.cameras.size(); ++c) local.push_back(*pipes[c]);
      std::size_t sink = 0;
      const auto t0 = std::chrono::steady_clock::now();
      arena.execute([&] {
        for (int t = 0; t < frames; ++t) {
          for (std::size_t c = 0; c < local.size(); ++c) {
            const SimulatedFrame& f = input[c][static_cast<std::size_t>(t)];
            const DepthFrame d = local[c].filtered_depth(f.depth);
            sink += register_frame(d, f.color, local[c].camera().model).size();
          }
        }
      });
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.points_registered += sink;
      row.run_fps.push_back(frames / s);
    }
    std::vector<double> sorted = row.run_fps;
    std::sort(sorted.begin(), sorted.end());
    row.fps = sorted[sorted.size() / 2];
    result.rows.push_back(std::move(row));
  }
  return result;
}

inline void print_benchmark(std::ostream& os, const BenchmarkResult& b) {
  char line[160];
  std::snprintf(line, sizeof line, "per-pixel stages, %d cameras x 640x480, %d frames per run, median of %zu runs\n",
                b.cameras, b.frames_per_run, b.rows.empty() ? std::size_t{0} : b.rows[0].run_fps.size());
  os << line;
  os << "threads      fps   speedup\n";
  for (const auto& r : b.rows) {
    std::snprintf(line, sizeof line, "%7d %8.2f %9.2f\n", r.threads, r.fps, b.speedup(r.threads));
    os << line;
  }
  std::snprintf(line, sizeof line, "reference %.0f fps (5 cameras, original GPU implementation)\n", kReferenceFps);
  os << line;
}

}  // namespace rgbdtrack
