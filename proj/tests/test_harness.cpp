#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rgbdtrack/harness.hpp"

namespace rgbdtrack {
namespace {

GroundTruthLog straight_truth(std::size_t n) {
  GroundTruthLog log(n);
  for (std::size_t i = 0; i < n; ++i) log[i].pose.position = Vec3(0.01 * static_cast<double>(i), 0.5, 0.3);
  return log;
}

json small_config(int frames) {
  json j = json::parse(R"({
    "schema_version": 1, "seed": 7, "frames": 1,
    "profiles": {"sane": {"noise_gap_factor": 0.5, "offset_poly": [0.0, 0.0, 0.002], "dropout_rate": 0.02}},
    "cameras": [
      {"name": "a", "eye": [0.865, 2.663, 2.2], "target": [0.0, 0.0, 0.3], "profile": "sane"},
      {"name": "b", "eye": [-2.265, -1.646, 2.2], "target": [0.0, 0.0, 0.3], "profile": "sane"}
    ],
    "correction": {"samples": 1500}
  })");
  j["frames"] = frames;
  return j;
}

TEST(Rms, PerfectTrackIsZero) {
  const GroundTruthLog truth = straight_truth(20);
  std::vector<std::optional<Vec3>> track;
  for (const auto& t : truth) track.push_back(t.pose.position);
  const RmsResult r = compute_rms(track, truth);
  EXPECT_EQ(r.overall, 0.0);
  EXPECT_EQ(r.frames, 20u);
}

TEST(Rms, ConstantOffsetAlongX) {
  const GroundTruthLog truth = straight_truth(20);
  std::vector<std::optional<Vec3>> track;
  for (const auto& t : truth) track.push_back(t.pose.position + Vec3(0.1, 0, 0));
  const RmsResult r = compute_rms(track, truth);
  EXPECT_NEAR(r.axis.x(), 0.1, 1e-15);
  EXPECT_EQ(r.axis.y(), 0.0);
  EXPECT_NEAR(r.overall, 0.1, 1e-15);
}

TEST(Rms, MatchesBruteForceAndSkipsGaps) {
  const GroundTruthLog truth = straight_truth(50);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<std::optional<Vec3>> track(50);
  std::vector<std::uint8_t> mask(50, 1);
  double sx = 0, sy = 0, sz = 0;
  int n = 0;
  for (int i = 0; i < 50; ++i) {
    if (i % 7 == 3) continue;
    track[i] = truth[i].pose.position + Vec3(g(rng), g(rng), g(rng));
    if (i % 5 == 0) {
      mask[i] = 0;
      continue;
    }
    const Vec3 e = *track[i] - truth[i].pose.position;
    sx += e.x() * e.x();
    sy += e.y() * e.y();
    sz += e.z() * e.z();
    ++n;
  }
  const RmsResult r = compute_rms(track, truth, mask);
  EXPECT_EQ(r.frames, static_cast<std::size_t>(n));
  EXPECT_NEAR(r.axis.x(), std::sqrt(sx / n), 1e-15);
  EXPECT_NEAR(r.axis.z(), std::sqrt(sz / n), 1e-15);
  EXPECT_NEAR(r.overall, std::sqrt((sx + sy + sz) / n), 1e-15);
  EXPECT_THROW(compute_rms(std::vector<std::optional<Vec3>>(50), truth), Error);
  EXPECT_THROW(compute_rms(std::vector<std::optional<Vec3>>(3), truth), Error);
}

TEST(Config, RejectsUnknownKeyAndVersion) {
  json j = small_config(5);
  j["colour"] = 1;
  try {
    parse_scenario(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
  j = small_config(5);
  j["schema_version"] = 2;
  EXPECT_THROW(parse_scenario(j), Error);
  j = small_config(5);
  j["cameras"][0]["profile"] = "missing";
  EXPECT_THROW(parse_scenario(j), Error);
  j = small_config(5);
  j["tracker"] = {{"alpha", -1.0}};
  EXPECT_THROW(parse_scenario(j), Error);
}

TEST(Config, StandardFileLoads) {
  const ScenarioConfig c = load_scenario(RGBDTRACK_SOURCE_DIR "/configs/standard.json");
  EXPECT_EQ(c.cameras.size(), 5u);
  EXPECT_EQ(c.frames, 600);
}

TEST(Scenario, SameSeedGivesIdenticalCsv) {
  const ScenarioConfig c = parse_scenario(small_config(12));
  std::string csv[2], fused[2];
  for (int i = 0; i < 2; ++i) {
    const ScenarioResult r = run_scenario(c);
    std::ostringstream a, b;
    write_trajectory_csv(a, r.report);
    write_fused_csv(b, r.report);
    csv[i] = a.str();
    fused[i] = b.str();
  }
  EXPECT_EQ(csv[0], csv[1]);
  EXPECT_EQ(fused[0], fused[1]);
  EXPECT_GT(fused[0].size(), 100u);
}

TEST(Scenario, NoiselessRunReachesQuantizationFloor) {
  json j = small_config(60);
  j["profiles"]["sane"] = {{"noise_gap_factor", 0.0}, {"offset_poly", json::array()}, {"dropout_rate", 0.0}};
  const ScenarioConfig c = parse_scenario(j);
  const ScenarioResult r = run_scenario(c);
  double gap = 0.0;
  int n = 0;
  for (const auto& cam : c.cameras) {
    const Extrinsics to_cam = cam.model.camera_to_world.inverse();
    for (const auto& t : r.truth) {
      gap += cam.profile.levels.level_gap(transform_point(t.pose.position, to_cam).z());
      ++n;
    }
  }
  gap /= n;
  EXPECT_LT(r.report.overall.overall, 2.0 * gap) << "mean level gap " << gap;
}

TEST(Scenario, OcclusionKeepsFusedOutput) {
  json j = small_config(40);
  j["occlusion"] = {{"camera", 0}, {"start", 20}, {"frames", 10}};
  const ScenarioResult r = run_scenario(parse_scenario(j));
  EXPECT_EQ(r.report.occluded_camera, 0);
  const FusedRun& f = r.report.fused_run("adaptive", TrackSource::kRobust);
  for (std::size_t t = 0; t < f.track.size(); ++t) EXPECT_TRUE(f.track[t]) << "frame " << t;
}

TEST(Benchmark, ReportsReferenceLine) {
  const ScenarioConfig c = parse_scenario(small_config(2));
  const std::vector<int> threads{1, 2};
  const BenchmarkResult b = benchmark(c, threads, 1, 1);
  ASSERT_EQ(b.rows.size(), 2u);
  EXPECT_GT(b.rows[0].fps, 0.0);
  EXPECT_EQ(b.speedup(1), 1.0);
  std::ostringstream os;
  print_benchmark(os, b);
  EXPECT_NE(os.str().find("reference 25 fps"), std::string::npos);
}

}  // namespace
}  // namespace rgbdtrack
