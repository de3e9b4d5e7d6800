#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "rgbdtrack/sensor_simulator.hpp"

namespace rgbdtrack {
namespace {

CameraModel overhead_camera() {
  CameraModel cam;
  cam.ir = {580.0, 580.0, 319.5, 239.5};
  cam.rgb = {525.0, 525.0, 319.5, 239.5};
  cam.ir_to_rgb = Extrinsics(Mat3::Identity(), Vec3{-0.025, 0.0, 0.0});
  cam.camera_to_world = look_at(Vec3(2.8, 0.0, 2.2), Vec3(0.0, 0.0, 0.3));
  return cam;
}

Scene static_scene() {
  Scene s;
  s.trajectory = WaypointTrajectory{{Vec3(0.2, 0.1, 0.3), Vec3(0.2, 0.1, 0.3)}, 1.0};
  return s;
}

TEST(DepthLevels, ZeroDisparityIsInvalid) {
  const DepthLevels l;
  EXPECT_EQ(l.depth_from_disparity(l.doff), kInvalidDepth);
  EXPECT_EQ(l.depth_from_disparity(l.doff + 8.0), kInvalidDepth);
}

TEST(DepthLevels, UnitDisparity) {
  const DepthLevels l;
  EXPECT_DOUBLE_EQ(l.depth_from_disparity(l.doff - 8.0), l.baseline * l.ir_focal);
}

TEST(DepthLevels, RoundTripWithinOneStep) {
  const DepthLevels l;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> z(0.8, 4.5);
  for (int i = 0; i < 2000; ++i) {
    const double d = z(rng);
    const double back = l.depth_from_disparity(std::round(l.disparity_from_depth(d)));
    EXPECT_LE(std::abs(back - d), l.level_gap(d));
    EXPECT_NEAR(l.depth_from_disparity(l.disparity_from_depth(d)), d, 1e-12);
  }
}

TEST(Quantize, LevelIsFixedPoint) {
  const DepthLevels l;
  for (std::int64_t kd = 400; kd < 1000; kd += 37) {
    const double z = l.level_depth(kd);
    EXPECT_EQ(l.quantize(z), z);
  }
}

TEST(Quantize, TieGoesToCloserDepth) {
  const DepthLevels l;
  int exact = 0;
  for (std::int64_t kd = 400; kd < 1050; ++kd) {
    // depth whose continuous disparity sits exactly between kd and kd + 1
    const double z = 8.0 * l.baseline * l.ir_focal / (l.doff - (kd + 0.5));
    if (l.disparity_from_depth(z) != kd + 0.5) continue;
    ++exact;
    EXPECT_EQ(l.quantize(z), std::min(l.level_depth(kd), l.level_depth(kd + 1)));
  }
  EXPECT_GT(exact, 10);
}

TEST(Quantize, GapGrowsWithDepth) {
  const DepthLevels l;
  EXPECT_GT(l.level_gap(4.0), l.level_gap(1.0));
  // gap is close to z^2 / (b f) scaled by the 1/8 disparity step
  for (double z : {1.0, 2.0, 3.0, 4.0}) {
    EXPECT_NEAR(l.level_gap(z), z * z / (8.0 * l.baseline * l.ir_focal), 0.05 * l.level_gap(z));
  }
}

TEST(Simulator, ZeroNoiseStaticSceneIsConstant) {
  SensorProfile p;  // no noise, offset or dropout
  const SensorSimulator sim(static_scene(), overhead_camera(), p);
  const SimulatedFrame a = sim.synthesize(0);
  for (std::int64_t t : {1, 17, 99}) {
    const SimulatedFrame b = sim.synthesize(t);
    EXPECT_EQ(a.depth.data, b.depth.data);
    EXPECT_EQ(a.color.data, b.color.data);
  }
}

TEST(Simulator, FullDropout) {
  SensorProfile p;
  p.dropout_rate = 1.0;
  const SensorSimulator sim(Scene{}, overhead_camera(), p);
  EXPECT_EQ(sim.synthesize(4).depth.count_valid(), 0u);
}

TEST(Simulator, DepthsAreLevelsInRange) {
  SensorProfile p;
  p.noise_gap_factor = 1.0;
  p.offset_poly = {0.0, 0.0, 0.01};
  p.seed = 9;
  const SensorSimulator sim(Scene{}, overhead_camera(), p);
  const SimulatedFrame f = sim.synthesize(12);
  ASSERT_GT(f.depth.count_valid(), 100000u);
  for (double z : f.depth.data.pixels()) {
    if (!is_valid_depth(z)) continue;
    EXPECT_TRUE(kUsefulDepth.contains(z));
    EXPECT_EQ(p.levels.quantize(z), z);
  }
}

TEST(Simulator, MarkerDiscCentresMatchProjection) {
  const Scene scene;
  const SensorSimulator sim(scene, overhead_camera(), SensorProfile{});
  const Rgb rear = hsv_to_rgb(scene.marker_color);
  const Rgb front = hsv_to_rgb(scene.front_marker_color);
  for (std::int64_t t : {0, 50, 200}) {
    const SimulatedFrame f = sim.synthesize(t);
    for (int m = 0; m < kMarkerCount; ++m) {
      const auto expected = sim.color_pixel_of(f.truth.markers[m]);
      ASSERT_TRUE(expected);
      const Rgb want = m == kFrontMarker ? front : rear;
      // brute-force centroid of marker-coloured pixels near the expected centre;
      // the window stays clear of the other rear marker
      double su = 0, sv = 0, n = 0;
      for (int v = 0; v < 480; ++v) {
        for (int u = 0; u < 640; ++u) {
          if (f.color.data(u, v) != want) continue;
          if (std::hypot(u - expected->x(), v - expected->y()) > 9.0) continue;
          su += u;
          sv += v;
          n += 1;
        }
      }
      ASSERT_GT(n, 0);
      EXPECT_LT(std::hypot(su / n - expected->x(), sv / n - expected->y()), 0.5);
    }
  }
}

TEST(Simulator, OcclusionHidesMarkersOnly) {
  const SensorSimulator sim(Scene{}, overhead_camera(), SensorProfile{});
  const SimulatedFrame seen = sim.synthesize(5);
  const SimulatedFrame hidden = sim.synthesize(5, FrameOptions{true});
  EXPECT_EQ(seen.depth.data, hidden.depth.data);
  const Rgb bg = hsv_to_rgb(Scene{}.background_color);
  for (const Rgb& c : hidden.color.data.pixels()) EXPECT_EQ(c, bg);
}

TEST(Simulator, NoiseIsDeterministicPerSeed) {
  SensorProfile p;
  p.noise_gap_factor = 1.0;
  p.dropout_rate = 0.1;
  p.seed = 42;
  const SensorSimulator a(Scene{}, overhead_camera(), p, 3);
  const SensorSimulator b(Scene{}, overhead_camera(), p, 3);
  EXPECT_EQ(a.synthesize(8).depth.data, b.synthesize(8).depth.data);
  p.seed = 43;
  const SensorSimulator c(Scene{}, overhead_camera(), p, 3);
  EXPECT_NE(a.synthesize(8).depth.data, c.synthesize(8).depth.data);
}

TEST(Trajectory, SubcircularDerivatives) {
  const SubcircularTrajectory tr;
  const double h = 1e-5;
  for (double t : {0.0, 1.3, 7.7}) {
    const auto s = tr.sample(t);
    const Vec3 fd_v = (tr.sample(t + h).position - tr.sample(t - h).position) / (2 * h);
    const Vec3 fd_a = (tr.sample(t + h).velocity - tr.sample(t - h).velocity) / (2 * h);
    EXPECT_LT((fd_v - s.velocity).norm(), 1e-6);
    EXPECT_LT((fd_a - s.acceleration).norm(), 1e-6);
  }
}

TEST(Calibration, SamplesAreValidReadings) {
  SensorProfile p;
  p.noise_gap_factor = 1.0;
  p.offset_poly = {0.0, 0.0, 0.01};
  const auto s = simulate_calibration_samples(p, 500, 1);
  ASSERT_GT(s.size(), 400u);
  for (const auto& x : s) {
    EXPECT_TRUE(kUsefulDepth.contains(x.z_sh));
    EXPECT_TRUE(kUsefulDepth.contains(x.z_cor));
  }
}

}  // namespace
}  // namespace rgbdtrack
