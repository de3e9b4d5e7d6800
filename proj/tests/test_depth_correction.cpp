#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "rgbdtrack/config.hpp"
#include "rgbdtrack/depth_correction.hpp"

namespace rgbdtrack {
namespace {

double rms_against_reference(std::span<const DepthSample> s, const CorrectionModel* m) {
  double sse = 0.0;
  for (const auto& x : s) sse += square((m ? x.z_sh - m->offset_at(x.z_sh) : x.z_sh) - x.z_cor);
  return std::sqrt(sse / static_cast<double>(s.size()));
}

TEST(Reliability, UsefulRangeCut) {
  DepthFrame f(3, 1, 0);
  f.data(0, 0) = 0.5;
  f.data(1, 0) = 5.0;
  f.data(2, 0) = 2.0;
  const DepthFrame out = filter_unreliable(f);
  EXPECT_EQ(out.data(0, 0), kInvalidDepth);
  EXPECT_EQ(out.data(1, 0), kInvalidDepth);
  EXPECT_EQ(out.data(2, 0), 2.0);
}

TEST(Fit, ZeroOffsetGivesZeroPolynomial) {
  std::vector<DepthSample> s;
  for (int i = 0; i <= 400; ++i) {
    const double z = 0.8 + 3.7 * i / 400.0;
    s.push_back({z, z});
  }
  const CorrectionModel m = fit_correction(s, DepthLevels{}, 8);
  double worst = 0.0;
  for (double z = 0.8; z <= 4.5; z += 0.01) worst = std::max(worst, std::abs(m.offset_at(z)));
  EXPECT_LT(worst, 1e-9);
}

TEST(Fit, RecoversCubicOffset) {
  auto g = [](double z) { return 0.01 - 0.02 * z + 0.015 * z * z - 0.002 * z * z * z; };
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.8, 4.5);
  std::vector<DepthSample> s;
  for (int i = 0; i < 500; ++i) {
    const double z_sh = u(rng);
    s.push_back({z_sh, z_sh - g(z_sh)});
  }
  const CorrectionModel m = fit_correction(s, DepthLevels{}, 3);
  double sse = 0.0;
  int n = 0;
  for (double z = m.support().min; z <= m.support().max; z += 0.01, ++n) sse += square(m.offset_at(z) - g(z));
  EXPECT_LT(std::sqrt(sse / n), 1e-6);
  EXPECT_LT(m.fit_rms(), 1e-9);
}

TEST(Fit, DriftySensorHalvesError) {
  SensorProfile p;
  p.noise_gap_factor = 1.0;
  p.offset_poly = {0.0, 0.0, 0.01};
  const auto train = simulate_calibration_samples(p, 4000, 1);
  const auto test = simulate_calibration_samples(p, 4000, 2);
  const CorrectionModel m = fit_correction(train, p.levels, 8);
  EXPECT_LT(rms_against_reference(test, &m), 0.55 * rms_against_reference(test, nullptr));
}

TEST(Fit, Errors) {
  std::vector<DepthSample> few{{1.0, 1.0}, {2.0, 2.0}};
  EXPECT_THROW(fit_correction(few, DepthLevels{}, 8), Error);
  std::vector<DepthSample> flat(20, DepthSample{2.0, 1.9});
  EXPECT_THROW(fit_correction(flat, DepthLevels{}, 2), Error);
  std::vector<DepthSample> nan(20, DepthSample{std::nan(""), 1.0});
  EXPECT_THROW(fit_correction(nan, DepthLevels{}, 2), Error);
}

TEST(Apply, IdentityLeavesFrameUnchanged) {
  const DepthLevels l;
  DepthFrame f(64, 8, 0);
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 64; ++u) f.data(u, v) = (u + v) % 5 == 0 ? kInvalidDepth : l.level_depth(500 + 7 * u + v);
  }
  const DepthFrame g = filter_unreliable(f);
  EXPECT_EQ(apply_correction(g, CorrectionModel::identity(l)).data, g.data);
}

TEST(Apply, CorrectedBelowRangeIsInvalid) {
  // offset of +0.1 m everywhere pushes a 0.85 m reading to 0.75 m
  const CorrectionModel m(ScaledPolynomial{{0.1}, 2.0, 1.0}, kUsefulDepth, DepthLevels{});
  DepthFrame f(2, 1, 0);
  f.data(0, 0) = 0.85;
  f.data(1, 0) = 2.0;
  const DepthFrame out = apply_correction(f, m);
  EXPECT_EQ(out.data(0, 0), kInvalidDepth);
  EXPECT_NEAR(out.data(1, 0), 1.9, 1e-12);
}

TEST(Apply, TableMatchesDirectEvaluation) {
  SensorProfile p;
  p.noise_gap_factor = 1.0;
  p.offset_poly = {0.0, 0.0, 0.01};
  const CorrectionModel m = fit_correction(simulate_calibration_samples(p, 3000, 5), p.levels, 8);
  ASSERT_FALSE(m.lut().empty());
  for (std::size_t i = 0; i < m.lut().size(); ++i) {
    const double z = m.levels().level_depth(m.lut_first_level() + static_cast<std::int64_t>(i));
    const double direct = m.correct(z);
    EXPECT_NEAR(m.lut()[i], direct, 1e-12);
    EXPECT_EQ(m.correct_level(z), m.lut()[i]);
  }
}

TEST(ModelIo, JsonRoundTrip) {
  SensorProfile p;
  p.offset_poly = {0.0, 0.0, 0.01};
  p.noise_gap_factor = 0.5;
  const CorrectionModel m = fit_correction(simulate_calibration_samples(p, 1000, 5), p.levels, 6);
  const CorrectionModel back = correction_from_json(json::parse(correction_to_json(m).dump()));
  for (double z = 0.8; z <= 4.5; z += 0.013) EXPECT_EQ(back.correct(z), m.correct(z));
  EXPECT_EQ(back.fit_rms(), m.fit_rms());
}

TEST(ModelIo, SamplesCsvRoundTrip) {
  const std::vector<DepthSample> s{{1.25, 1.2}, {3.0000000000000004, 2.9}, {4.4, 4.31}};
  std::stringstream ss;
  write_samples_csv(ss, s);
  const auto back = read_samples_csv(ss);
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].z_sh, s[i].z_sh);
    EXPECT_EQ(back[i].z_cor, s[i].z_cor);
  }
}

TEST(ModelIo, MalformedCsv) {
  std::stringstream ss("z_sh,z_cor\n1.0,abc\n");
  EXPECT_THROW(read_samples_csv(ss), Error);
}

}  // namespace
}  // namespace rgbdtrack
