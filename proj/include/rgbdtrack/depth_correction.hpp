#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rgbdtrack/camera_geometry.hpp"
#include "rgbdtrack/math.hpp"
#include "rgbdtrack/parallel.hpp"
#include "rgbdtrack/sensor_simulator.hpp"

namespace rgbdtrack {

/// Drops readings outside the useful range. INVALID stays INVALID.
inline DepthFrame filter_unreliable(const DepthFrame& frame, DepthRange range = kUsefulDepth) {
  DepthFrame out = frame;
  parallel_rows(out.height(), [&](int v) {
    for (double& z : out.data.row(v)) {
      if (is_valid_depth(z) && !range.contains(z)) z = kInvalidDepth;
    }
  });
  return out;
}

/// Polynomial in the normalized variable x = (z - center) / half_width.
struct ScaledPolynomial {
  std::vector<double> coefficients;
  double center = 0.0;
  double half_width = 1.0;

  double operator()(double z) const { return horner(coefficients, (z - center) / half_width); }
};

/// Offset model f(z_sh) = z_sh - z_cor plus a table of corrected values for
/// every raw disparity level inside the useful range.
class CorrectionModel {
 public:
  CorrectionModel() = default;
  CorrectionModel(ScaledPolynomial offset, DepthRange support, DepthLevels levels, double fit_rms = 0.0,
                  DepthRange valid = kUsefulDepth)
      : offset_(std::move(offset)), support_(support), valid_(valid), levels_(levels), fit_rms_(fit_rms) {
    build_lut();
  }

  /// Zero offset: apply_correction leaves frames untouched.
  static CorrectionModel identity(DepthLevels levels = {}) {
    return CorrectionModel(ScaledPolynomial{{0.0}, 0.5 * (kUsefulDepth.min + kUsefulDepth.max), 1.0}, kUsefulDepth,
                           levels);
  }

  /// Offset at z, using the correction of the nearest supported depth
  /// outside the sample support.
  double offset_at(double z) const { return offset_(std::clamp(z, support_.min, support_.max)); }

  /// Corrected depth, or INVALID if it leaves the valid range.
  double correct(double z) const {
    const double c = z - offset_at(z);
    return valid_.contains(c) ? c : kInvalidDepth;
  }

  /// Table lookup when z is exactly a representable level, direct
  /// evaluation otherwise. Both paths give the same bits.
  double correct_level(double z) const {
    const std::int64_t kd = levels_.level_index(z);
    if (kd >= kd_min_ && kd < kd_min_ + static_cast<std::int64_t>(lut_.size()) && levels_.level_depth(kd) == z) {
      return lut_[static_cast<std::size_t>(kd - kd_min_)];
    }
    return correct(z);
  }

  const ScaledPolynomial& polynomial() const { return offset_; }
  const DepthRange& support() const { return support_; }
  const DepthRange& valid_range() const { return valid_; }
  const DepthLevels& levels() const { return levels_; }
  double fit_rms() const { return fit_rms_; }
  std::int64_t lut_first_level() const { return kd_min_; }
  std::span<const double> lut() const { return lut_; }

 private:
  void build_lut() {
    kd_min_ = levels_.level_index(valid_.min);
    const std::int64_t kd_max = levels_.level_index(valid_.max);
    lut_.clear();
    for (std::int64_t kd = kd_min_; kd <= kd_max; ++kd) lut_.push_back(correct(levels_.level_depth(kd)));
  }

  ScaledPolynomial offset_;
  DepthRange support_;
  DepthRange valid_ = kUsefulDepth;
  DepthLevels levels_;
  double fit_rms_ = 0.0;
  std::int64_t kd_min_ = 0;
  std::vector<double> lut_;
};

/// Least-squares fit of the offset polynomial to (reported, reference)
/// pairs. The depth variable is mapped onto [-1, 1] over the sample support
/// before building the Vandermonde system.
inline CorrectionModel fit_correction(std::span<const DepthSample> samples, const DepthLevels& levels, int degree = 8) {
  if (degree < 0) throw Error(ErrorCode::kFit, "degree must be non-negative");
  const auto n_coef = static_cast<std::size_t>(degree) + 1;
  if (samples.size() < n_coef) {
    throw Error(ErrorCode::kFit, "need at least " + std::to_string(n_coef) + " samples, got " +
                                     std::to_string(samples.size()));
  }
  DepthRange support{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : samples) {
    if (!std::isfinite(s.z_sh) || !std::isfinite(s.z_cor)) throw Error(ErrorCode::kFit, "non-finite sample");
    support.min = std::min(support.min, s.z_sh);
    support.max = std::max(support.max, s.z_sh);
  }
  if (!(support.max > support.min)) throw Error(ErrorCode::kFit, "samples do not span a depth interval");

  ScaledPolynomial poly;
  poly.center = 0.5 * (support.min + support.max);
  poly.half_width = 0.5 * (support.max - support.min);

  Eigen::MatrixXd a(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(n_coef));
  Eigen::VectorXd b(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = (samples[i].z_sh - poly.center) / poly.half_width;
    double p = 1.0;
    for (std::size_t j = 0; j < n_coef; ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p;
      p *= x;
    }
    b(static_cast<Eigen::Index>(i)) = samples[i].z_sh - samples[i].z_cor;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < static_cast<Eigen::Index>(n_coef)) throw Error(ErrorCode::kFit, "rank-deficient design matrix");
  const Eigen::VectorXd c = qr.solve(b);
  poly.coefficients.assign(c.data(), c.data() + c.size());

  double sse = 0.0;
  for (const auto& s : samples) sse += square(s.z_sh - poly(s.z_sh) - s.z_cor);
  const double rms = std::sqrt(sse / static_cast<double>(samples.size()));
  return CorrectionModel(std::move(poly), support, levels, rms);
}

inline DepthFrame apply_correction(const DepthFrame& frame, const CorrectionModel& model) {
  DepthFrame out = frame;
  parallel_rows(out.height(), [&](int v) {
    for (double& z : out.data.row(v)) {
      if (is_valid_depth(z)) z = model.correct_level(z);
    }
  });
  return out;
}

}  // namespace rgbdtrack
