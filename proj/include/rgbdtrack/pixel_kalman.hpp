#pragma once

#include <cstdint>
#include <optional>

#include "rgbdtrack/camera_geometry.hpp"
#include "rgbdtrack/math.hpp"
#include "rgbdtrack/parallel.hpp"
#include "rgbdtrack/sensor_simulator.hpp"

namespace rgbdtrack {

/// Measurement variance of a depth reading, R(z) = scale * gap(z)^2 / 12
/// (variance of uniform quantization between adjacent levels).
struct DepthNoiseModel {
  DepthLevels levels;
  double scale = 1.0;

  double variance(double z) const { return scale * square(levels.level_gap(z)) / 12.0; }
};

/// Process noise added to the prediction variance. The default reproduces
/// the static model (no process noise); kLevelGap adds gap(z)^2 / 12.
enum class PixelProcessNoise { kNone, kLevelGap };

struct PixelKalmanConfig {
  double initial_variance = 1.0;  // P0, m^2
  int reset_after = 5;            // consecutive INVALID frames tolerated before reset
  PixelProcessNoise process_noise = PixelProcessNoise::kNone;
};

struct PixelState {
  double estimate = 0.0;
  double variance = 0.0;
  std::uint16_t invalid_run = 0;
  bool initialized = false;
};

/// One scalar Kalman step on a static state: predict Z and P unchanged
/// (plus optional process noise q), then correct with the measurement.
/// An uninitialized state adopts the measurement with variance p0.
inline PixelState pk_update(const PixelState& state, double measurement, double r, double p0, double q = 0.0) {
  PixelState out;
  out.initialized = true;
  if (!state.initialized) {
    out.estimate = measurement;
    out.variance = p0;
    return out;
  }
  const double prior_z = state.estimate;
  const double prior_p = state.variance + q;
  const double gain = prior_p / (prior_p + r);
  out.estimate = prior_z + gain * (measurement - prior_z);
  out.variance = (1.0 - gain) * prior_p;
  return out;
}

/// Independent scalar filters for every depth pixel of one camera.
class PixelKalmanGrid {
 public:
  PixelKalmanGrid() = default;
  PixelKalmanGrid(int width, int height, DepthNoiseModel noise, PixelKalmanConfig config = {})
      : states_(width, height), noise_(noise), config_(config) {}

  int width() const { return states_.width(); }
  int height() const { return states_.height(); }
  const Grid<PixelState>& states() const { return states_; }
  const PixelKalmanConfig& config() const { return config_; }

  /// Advances every pixel with `frame` and returns the current estimates
  /// (INVALID where a pixel has no estimate).
  template <bool Parallel = true>
  DepthFrame filter_frame(const DepthFrame& frame) {
    return filter_frame<Parallel>(frame, [](double z) { return z; });
  }

  /// As above, with `pre(z)` applied to every reading before filtering, so
  /// per-pixel preprocessing shares the same pass over the frame.
  template <bool Parallel = true, typename Pre>
  DepthFrame filter_frame(const DepthFrame& frame, Pre&& pre) {
    if (frame.width() != states_.width() || frame.height() != states_.height()) {
      throw Error(ErrorCode::kDimensionMismatch, "frame and filter grid sizes differ");
    }
    DepthFrame out(frame.width(), frame.height(), frame.timestamp);
    auto row_fn = [&](int v) {
      const auto in = frame.data.row(v);
      auto st = states_.row(v);
      auto dst = out.data.row(v);
      for (std::size_t u = 0; u < in.size(); ++u) {
        st[u] = step(st[u], pre(in[u]));
        dst[u] = st[u].initialized ? st[u].estimate : kInvalidDepth;
      }
    };
    if constexpr (Parallel) {
      parallel_rows(frame.height(), row_fn);
    } else {
      sequential_rows(frame.height(), row_fn);
    }
    return out;
  }

  PixelState step(const PixelState& s, double z) const {
    if (!is_valid_depth(z)) {
      PixelState held = s;
      if (!held.initialized) return held;
      if (++held.invalid_run > config_.reset_after) return PixelState{};
      return held;
    }
    const double r = noise_.variance(z);
    const double q = config_.process_noise == PixelProcessNoise::kLevelGap ? r / noise_.scale : 0.0;
    return pk_update(s, z, r, config_.initial_variance, q);
  }

 private:
  Grid<PixelState> states_;
  DepthNoiseModel noise_;
  PixelKalmanConfig config_;
};

}  // namespace rgbdtrack
