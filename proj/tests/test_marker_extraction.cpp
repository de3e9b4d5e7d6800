#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rgbdtrack/marker_extraction.hpp"

namespace rgbdtrack {
namespace {

BinaryMask random_mask(int w, int h, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution on(p);
  BinaryMask m(w, h, 0);
  for (auto& x : m.pixels()) x = on(rng) ? 1 : 0;
  return m;
}

void fill_rect(BinaryMask& m, int u0, int v0, int u1, int v1) {
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) m(u, v) = 1;
  }
}

TEST(Hsv, PureRed) {
  const Hsv c = rgb_to_hsv(Rgb{255, 0, 0});
  EXPECT_EQ(c.h, 0.0);
  EXPECT_EQ(c.s, 1.0);
  EXPECT_EQ(c.v, 1.0);
}

TEST(Hsv, GrayHasNoSaturation) {
  const Hsv c = rgb_to_hsv(Rgb{128, 128, 128});
  EXPECT_EQ(c.s, 0.0);
  EXPECT_DOUBLE_EQ(c.v, 128.0 / 255.0);
}

TEST(Hsv, RoundTripThroughRgb) {
  for (int r = 0; r < 256; r += 15) {
    for (int g = 0; g < 256; g += 15) {
      for (int b = 0; b < 256; b += 15) {
        const Rgb c{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
        EXPECT_EQ(hsv_to_rgb(rgb_to_hsv(c)), c);
      }
    }
  }
}

TEST(Hsv, LightingShiftMovesHsvLessThanRgb) {
  // an orange surface seen under full and under dimmed light; both colour
  // spaces scaled to 0..255 per channel
  const Rgb lit{240, 140, 40};
  auto dim = [](const Rgb& c, double k) {
    return Rgb{static_cast<std::uint8_t>(std::lround(c.r * k)), static_cast<std::uint8_t>(std::lround(c.g * k)),
               static_cast<std::uint8_t>(std::lround(c.b * k))};
  };
  for (double k : {0.9, 0.8, 0.7, 0.6}) {
    const Rgb shade = dim(lit, k);
    const double rgb_d = std::sqrt(square(lit.r - shade.r) + square(lit.g - shade.g) + square(lit.b - shade.b));
    const Hsv a = rgb_to_hsv(lit), b = rgb_to_hsv(shade);
    const double hsv_d = 255.0 * std::sqrt(square((a.h - b.h) / 360.0) + square(a.s - b.s) + square(a.v - b.v));
    EXPECT_LT(hsv_d, rgb_d) << "dimming " << k;
  }
}

TEST(Threshold, FullCubeAndEmptyInterval) {
  ColorFrame f(32, 16, 0);
  std::mt19937_64 rng(2);
  for (auto& c : f.data.pixels()) c = Rgb{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())};
  const HsvFrame hsv = rgb_to_hsv(f);
  const BinaryMask all = threshold_mask(hsv, HsvRange{});
  for (auto x : all.pixels()) EXPECT_EQ(x, 1);
  HsvRange empty;
  empty.value = {0.6, 0.4};
  const BinaryMask none = threshold_mask(hsv, empty);
  for (auto x : none.pixels()) EXPECT_EQ(x, 0);
}

TEST(Threshold, HueWrapsThroughZero) {
  HsvRange r;
  r.hue = {350.0, 10.0};
  EXPECT_TRUE(r.contains(Hsv{5.0, 0.5, 0.5}));
  EXPECT_TRUE(r.contains(Hsv{355.0, 0.5, 0.5}));
  EXPECT_FALSE(r.contains(Hsv{180.0, 0.5, 0.5}));
}

TEST(Threshold, FusedPassMatchesSeparateSteps) {
  ColorFrame f(64, 48, 0);
  std::mt19937_64 rng(8);
  for (auto& c : f.data.pixels()) {
    // short runs of repeated colours, as in rendered frames
    if (rng() % 3 == 0) c = Rgb{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())};
  }
  const std::array<HsvRange, 2> ranges{HsvRange{{40, 70}, {0.5, 1}, {0.4, 1}}, HsvRange{{300, 60}, {0.1, 1}, {0, 1}}};
  const auto fused = threshold_color(f, ranges);
  const HsvFrame hsv = rgb_to_hsv(f);
  for (std::size_t k = 0; k < ranges.size(); ++k) EXPECT_EQ(fused[k], threshold_mask(hsv, ranges[k]));
}

TEST(Morphology, SpeckRemoved) {
  BinaryMask m(20, 20, 0);
  m(10, 10) = 1;
  const BinaryMask o = morph_open(m, 1);
  for (auto x : o.pixels()) EXPECT_EQ(x, 0);
}

TEST(Morphology, RectangleInteriorKept) {
  BinaryMask m(40, 30, 0);
  fill_rect(m, 5, 6, 20, 18);
  const BinaryMask o = morph_open(m, 2);
  EXPECT_EQ(o, m);  // a rectangle is open under a square kernel
}

TEST(Morphology, Idempotent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const BinaryMask m = random_mask(50, 40, 0.6, seed);
    for (int r : {1, 2}) {
      const BinaryMask once = morph_open(m, r);
      EXPECT_EQ(morph_open(once, r), once);
    }
  }
}

TEST(Morphology, CroppedEqualsFullImage) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    BinaryMask m(60, 50, 0);
    const BinaryMask noise = random_mask(25, 20, 0.7, seed);
    // blob of noise touching the image border on some seeds
    const int ou = static_cast<int>(seed % 3) * 17, ov = static_cast<int>(seed % 4) * 10;
    for (int v = 0; v < 20; ++v) {
      for (int u = 0; u < 25; ++u) m(std::min(u + ou, 59), std::min(v + ov, 49)) |= noise(u, v);
    }
    for (int r : {1, 2, 3}) EXPECT_EQ(morph_open(m, r), dilate(erode(m, r), r));
  }
}

TEST(Components, SquareCentroid) {
  BinaryMask m(30, 30, 0);
  fill_rect(m, 8, 8, 12, 12);
  const auto blobs = extract_centroids(m);
  ASSERT_EQ(blobs.size(), 1u);
  EXPECT_EQ(blobs[0].area, 25);
  EXPECT_EQ(blobs[0].centroid(), Vec2(10, 10));
}

TEST(Components, TwoBlobs) {
  BinaryMask m(30, 30, 0);
  fill_rect(m, 1, 1, 3, 3);
  fill_rect(m, 20, 20, 25, 22);
  EXPECT_EQ(extract_centroids(m).size(), 2u);
}

TEST(Components, CentroidEqualsBruteForceMean) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const BinaryMask m = random_mask(40, 30, 0.35, seed);
    const ComponentLabels c = label_components(m);
    for (const Blob& b : c.blobs) {
      std::int64_t n = 0, su = 0, sv = 0;
      for (int v = 0; v < m.height(); ++v) {
        for (int u = 0; u < m.width(); ++u) {
          if (c.labels(u, v) != b.label) continue;
          ++n;
          su += u;
          sv += v;
        }
      }
      EXPECT_EQ(b.area, n);
      EXPECT_EQ(b.centroid().x(), static_cast<double>(su) / static_cast<double>(n));
      EXPECT_EQ(b.centroid().y(), static_cast<double>(sv) / static_cast<double>(n));
    }
  }
}

TEST(Components, EightConnectivity) {
  BinaryMask m(5, 5, 0);
  m(1, 1) = 1;
  m(2, 2) = 1;
  m(3, 1) = 1;
  EXPECT_EQ(label_components(m).blobs.size(), 1u);
}

TEST(Pose, EquilateralTriangleCentre) {
  const double s = std::sqrt(3.0) / 2.0;
  const Vec3 c(1.0, -2.0, 0.3);
  const MarkerTriple m{c + Vec3(1, 0, 0), c + Vec3(-0.5, s, 0), c + Vec3(-0.5, -s, 0)};
  const auto pose = compute_pose(m);
  ASSERT_TRUE(pose);
  EXPECT_LT((pose->position - c).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(pose->yaw, 0.0);
}

TEST(Pose, FrontAlongPlusXIsZeroYaw) {
  const MarkerTriple m{Vec3(0.1, 0, 0), Vec3(-0.05, 0.08, 0), Vec3(-0.05, -0.08, 0)};
  EXPECT_DOUBLE_EQ(compute_pose(m)->yaw, 0.0);
  const MarkerTriple turned{Vec3(0, 0.1, 0), Vec3(-0.08, -0.05, 0), Vec3(0.08, -0.05, 0)};
  EXPECT_NEAR(compute_pose(turned)->yaw, std::numbers::pi / 2, 1e-12);
}

TEST(Pose, MissingMarker) {
  MarkerTriple m{Vec3(0.1, 0, 0), std::nullopt, Vec3(-0.05, -0.08, 0)};
  EXPECT_FALSE(compute_pose(m));
  m[1] = Vec3(0.2, 0, 0);
  m[2] = Vec3(-0.05, 0, 0);  // collinear
  EXPECT_FALSE(compute_pose(m));
}

CameraModel side_camera() {
  CameraModel cam;
  cam.ir = {580.0, 580.0, 319.5, 239.5};
  cam.rgb = {525.0, 525.0, 319.5, 239.5};
  cam.ir_to_rgb = Extrinsics(Mat3::Identity(), Vec3{-0.025, 0.0, 0.0});
  cam.camera_to_world = look_at(Vec3(0.865, 2.663, 2.2), Vec3(0.0, 0.0, 0.3));
  return cam;
}

TEST(Detect, NoiseFreeFrameFindsMarkersNearTruth) {
  const CameraModel cam = side_camera();
  const SensorSimulator sim(Scene{}, cam, SensorProfile{});
  for (std::int64_t t : {0, 100, 250}) {
    const SimulatedFrame f = sim.synthesize(t);
    const PointCloud cloud = register_frame(f.depth, f.color, cam);
    for (auto mode : {MarkerDepthMode::kCentroidPixel, MarkerDepthMode::kBlobMean}) {
      MarkerDetectorConfig cfg;
      cfg.depth_mode = mode;
      const MarkerObservation obs = detect_markers(f.color, cloud, cam, DepthLevels{}, cfg);
      ASSERT_TRUE(obs.all_visible());
      for (int m = 0; m < kMarkerCount; ++m) {
        const Vec3 truth = sim.world_to_camera(f.truth.markers[m]);
        EXPECT_LT((obs.markers[m].position - truth).norm(), 0.03) << "marker " << m << " frame " << t;
      }
    }
  }
}

TEST(Detect, OccludedMarkersAreUnseen) {
  const CameraModel cam = side_camera();
  const SensorSimulator sim(Scene{}, cam, SensorProfile{});
  const SimulatedFrame f = sim.synthesize(3, FrameOptions{true});
  const MarkerObservation obs = detect_markers(f.color, register_frame(f.depth, f.color, cam), cam, DepthLevels{}, {});
  for (const auto& m : obs.markers) EXPECT_FALSE(m.visible);
}

}  // namespace
}  // namespace rgbdtrack
