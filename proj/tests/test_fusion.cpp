#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "rgbdtrack/fusion.hpp"
#include "support/oracles.hpp"

namespace rgbdtrack {
namespace {

SensorEstimate estimate(int cam, const Vec3& x, const Mat3& P, double z = 2.0, double k = 1e-4) {
  SensorEstimate e;
  e.camera = cam;
  e.x_hat_world = x;
  e.P = P;
  e.K_sensor = k * Mat3::Identity();
  e.Z_dist = z;
  return e;
}

double min_eigenvalue(const Mat3& m) { return Eigen::SelfAdjointEigenSolver<Mat3>(symmetrized(m)).eigenvalues().minCoeff(); }

TEST(ToWorld, IdentityPose) {
  CameraModel cam;
  const Mat3 P = Mat3(Eigen::Vector3d(1, 2, 3).asDiagonal());
  const SensorEstimate e = to_world(0, Vec3(1, 2, 3), P, cam, Mat3::Identity());
  EXPECT_EQ(e.x_hat_world, Vec3(1, 2, 3));
  EXPECT_EQ(e.P, P);
  EXPECT_DOUBLE_EQ(e.Z_dist, std::sqrt(14.0));
}

TEST(ToWorld, RotationPreservesTraceAndRoundTrips) {
  CameraModel cam;
  cam.camera_to_world = look_at(Vec3(2.0, -1.5, 2.2), Vec3(0, 0, 0.3));
  std::mt19937_64 rng(3);
  const Mat3 P = testing::random_spd(rng, 3, 0.01);
  const Vec3 x(0.2, -0.1, 2.5);
  const SensorEstimate e = to_world(1, x, P, cam, Mat3::Identity());
  EXPECT_NEAR(e.P.trace(), P.trace(), 1e-12);
  const Vec3 back = transform_point(e.x_hat_world, cam.camera_to_world.inverse());
  EXPECT_LT((back - x).norm(), 1e-12);
}

TEST(Weights, IdenticalInputsShareEqually) {
  const std::vector<SensorEstimate> e(4, estimate(0, Vec3::Zero(), 0.01 * Mat3::Identity()));
  for (auto mode : {WeightingMode::kFast, WeightingMode::kAdaptive}) {
    for (double w : ci_weights(e, mode)) EXPECT_NEAR(w, 0.25, 1e-15);
  }
}

TEST(Weights, FastFollowsInformation) {
  const Mat3 P2 = 0.01 * Mat3::Identity();
  const std::vector<SensorEstimate> e{estimate(0, Vec3::Zero(), 2.0 * P2), estimate(1, Vec3::Zero(), P2)};
  const auto w = ci_weights(e, WeightingMode::kFast);
  EXPECT_NEAR(w[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[1], 2.0 / 3.0, 1e-15);
}

TEST(Weights, ScoresOneOneTwo) {
  const std::vector<double> s{1.0, 1.0, 2.0};
  const auto w = weights_from_scores(s);
  EXPECT_DOUBLE_EQ(w[0], 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(w[1], 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(w[2], 2.0 / 8.0);
}

TEST(Weights, DegenerateScores) {
  EXPECT_EQ(weights_from_scores(std::vector<double>{5.0}), std::vector<double>{1.0});
  const auto w = weights_from_scores(std::vector<double>{0.0, 0.0, 0.0});
  for (double x : w) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
  EXPECT_THROW(weights_from_scores(std::vector<double>{}), Error);
  EXPECT_THROW(weights_from_scores(std::vector<double>{1.0, -1.0}), Error);
}

TEST(Weights, SumToOneAndOrdered) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> count(2, 8);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(count(rng));
    for (double& x : s) x = u(rng);
    const auto w = weights_from_scores(s);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_GE(w[i], 0.0);
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[i] < s[j]) EXPECT_GT(w[i], w[j]);
      }
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    auto set = testing::correlated_estimates(rng, count(rng));
    for (auto mode : {WeightingMode::kFast, WeightingMode::kAdaptive}) {
      const auto w = ci_weights(set.estimates, mode);
      EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    }
  }
}

TEST(Fuse, SingleEstimatePassesThrough) {
  std::mt19937_64 rng(5);
  const Mat3 P = testing::random_spd(rng, 3, 0.01);
  const std::vector<SensorEstimate> e{estimate(0, Vec3(1, 2, 3), P)};
  for (auto mode : {WeightingMode::kNaive, WeightingMode::kFast, WeightingMode::kAdaptive}) {
    const FusedEstimate f = ci_fuse(e, mode);
    EXPECT_LT((f.x_tilde - Vec3(1, 2, 3)).norm(), 1e-12);
    EXPECT_LT((f.P_fused - P).norm(), 1e-12 * P.norm());
  }
}

TEST(Fuse, EqualCovariancesGiveMidpoint) {
  const Mat3 P = 0.02 * Mat3::Identity();
  const std::vector<SensorEstimate> e{estimate(0, Vec3(0, 0, 0), P), estimate(1, Vec3(1, -2, 4), P)};
  const FusedEstimate f = ci_fuse(e, WeightingMode::kFast);
  EXPECT_LT((f.x_tilde - Vec3(0.5, -1, 2)).norm(), 1e-12);
  EXPECT_LT((f.P_fused - P).norm(), 1e-15);
  EXPECT_LT((ci_fuse(e, WeightingMode::kNaive).P_fused - 0.5 * P).norm(), 1e-15);
}

TEST(Fuse, CovarianceIntersectionDominatesNaive) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto set = testing::correlated_estimates(rng, 2 + trial % 5);
    const Mat3 naive = ci_fuse(set.estimates, WeightingMode::kNaive).P_fused;
    for (auto mode : {WeightingMode::kFast, WeightingMode::kAdaptive}) {
      EXPECT_GE(min_eigenvalue(ci_fuse(set.estimates, mode).P_fused - naive), -1e-12);
    }
  }
}

TEST(Fuse, ExactlyConservativeUnderCorrelation) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const auto set = testing::correlated_estimates(rng, 2 + trial % 6);
    for (auto mode : {WeightingMode::kFast, WeightingMode::kAdaptive}) {
      const FusedEstimate f = ci_fuse(set.estimates, mode);
      const Mat3 actual = testing::exact_fused_error_covariance(set, f);
      EXPECT_GE(min_eigenvalue(f.P_fused - actual), -1e-12 * f.P_fused.norm());
    }
  }
}

TEST(Fuse, MonteCarloConservative) {
  for (auto mode : {WeightingMode::kFast, WeightingMode::kAdaptive}) {
    EXPECT_GT(testing::conservativeness_margin(7, 20000, mode), -0.02);
  }
}

TEST(Fuse, Errors) {
  const std::vector<SensorEstimate> none;
  EXPECT_THROW(ci_fuse(none, WeightingMode::kFast), Error);
  std::vector<SensorEstimate> bad{estimate(0, Vec3::Zero(), Mat3::Zero())};
  EXPECT_THROW(ci_fuse(bad, WeightingMode::kFast), Error);
  bad[0].P = Mat3::Identity();
  bad[0].Z_dist = 0.0;
  EXPECT_THROW(ci_fuse(bad, WeightingMode::kAdaptive), Error);
  const std::vector<double> w{1.0, 1.0};
  EXPECT_THROW(ci_fuse(std::vector<SensorEstimate>{estimate(0, Vec3::Zero(), Mat3::Identity())}, w), Error);
}

CameraFrameEstimate camera_estimate(int cam, const MarkerTriple& pts, const Mat3& P, double z) {
  CameraFrameEstimate c;
  c.camera = cam;
  for (int m = 0; m < kMarkerCount; ++m) {
    if (pts[m]) c.markers[m] = estimate(cam, *pts[m], P, z);
  }
  return c;
}

TEST(FuseFrame, EqualCamerasAverage) {
  const double s = std::sqrt(3.0) / 2.0;
  const Vec3 c(0.4, -0.2, 0.3);
  const MarkerTriple a{c + 0.1 * Vec3(1, 0, 0), c + 0.1 * Vec3(-0.5, s, 0), c + 0.1 * Vec3(-0.5, -s, 0)};
  const Vec3 shift(0.0, 0.02, 0.0);
  const MarkerTriple b{*a[0] + shift, *a[1] + shift, *a[2] + shift};
  const Mat3 P = 1e-4 * Mat3::Identity();
  const std::vector<CameraFrameEstimate> cams{camera_estimate(0, a, P, 3.0), camera_estimate(1, b, P, 3.0)};
  const FusedFrame f = fuse_frame(cams, WeightingMode::kAdaptive);
  EXPECT_LT((f.pose.position - (c + 0.5 * shift)).norm(), 1e-12);
  EXPECT_NEAR(f.pose.yaw, 0.0, 1e-12);
  ASSERT_EQ(f.camera_weights.size(), 2u);
  EXPECT_NEAR(f.camera_weights[0], 0.5, 1e-15);
}

TEST(FuseFrame, OccludedCameraLosesWeight) {
  // the occluded camera's marker covariance grows each predicted frame
  const double s = std::sqrt(3.0) / 2.0;
  const MarkerTriple pts{Vec3(0.1, 0, 0.3), Vec3(-0.05, 0.1 * s, 0.3), Vec3(-0.05, -0.1 * s, 0.3)};
  const Mat3 P = 1e-4 * Mat3::Identity();
  for (auto mode : {WeightingMode::kFast, WeightingMode::kAdaptive}) {
    double last = 1.0;
    for (int k = 0; k < 10; ++k) {
      const Mat3 grown = P * (1.0 + 0.5 * k * k);
      const std::vector<CameraFrameEstimate> cams{camera_estimate(0, pts, grown, 2.5), camera_estimate(1, pts, P, 2.5),
                                                  camera_estimate(2, pts, P, 3.5)};
      const FusedFrame f = fuse_frame(cams, mode);
      if (k > 0) EXPECT_LT(f.camera_weights[0], last);
      last = f.camera_weights[0];
    }
  }
}

TEST(FuseFrame, NoCameraIsAnError) {
  const std::vector<CameraFrameEstimate> cams{CameraFrameEstimate{}};
  EXPECT_THROW(fuse_frame(cams, WeightingMode::kFast), Error);
}

}  // namespace
}  // namespace rgbdtrack
