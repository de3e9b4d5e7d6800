#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rgbdtrack/camera_geometry.hpp"
#include "rgbdtrack/error.hpp"

namespace rgbdtrack {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

/// Newtonian point model: state [x y z vx vy vz], position observed.
struct MotionModel {
  Mat6 F = Mat6::Identity();
  Mat63 B = Mat63::Zero();
  Mat36 H = Mat36::Zero();
  double dt = 0.0;
  Mat6 Q = Mat6::Zero();
  Mat3 R = Mat3::Identity();
};

/// F = [[I, dt I], [0, I]] and B = [dt^2/2 I; dt I]. dt = 0 gives F = I, B = 0.
inline void transition_matrices(double dt, Mat6& F, Mat63& B) {
  if (dt < 0.0) throw Error(ErrorCode::kInvalidInput, "dt must be non-negative");
  F.setIdentity();
  F.topRightCorner<3, 3>() = dt * Mat3::Identity();
  B.topRows<3>() = 0.5 * dt * dt * Mat3::Identity();
  B.bottomRows<3>() = dt * Mat3::Identity();
}

/// Acceleration is unknown to the tracker and enters as process noise
/// Q = B diag(q_accel^2) B^T + floor I.
inline MotionModel make_motion_model(double dt, double q_accel, double r_pos, double q_floor = 1e-12) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidInput, "dt must be positive");
  if (!(r_pos > 0.0)) throw Error(ErrorCode::kInvalidInput, "r_pos must be positive");
  MotionModel m;
  m.dt = dt;
  transition_matrices(dt, m.F, m.B);
  m.H.setZero();
  m.H.leftCols<3>().setIdentity();
  m.Q = q_accel * q_accel * m.B * m.B.transpose() + q_floor * Mat6::Identity();
  m.R = r_pos * r_pos * Mat3::Identity();
  return m;
}

template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() == 0) return true;
  if (!m.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m.eval());
  return llt.info() == Eigen::Success;
}

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (0.5 * (m + m.transpose())).eval();
}

struct KalmanState {
  Vec6 x = Vec6::Zero();
  Mat6 P = Mat6::Identity();
};

inline KalmanState kf_predict(const KalmanState& s, const MotionModel& model) {
  return {model.F * s.x, symmetrized(model.F * s.P * model.F.transpose() + model.Q)};
}

inline KalmanState kf_update(const KalmanState& s, const MotionModel& model, const Vec3& z) {
  const Mat3 S = model.H * s.P * model.H.transpose() + model.R;
  Eigen::LLT<Mat3> llt(S);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kNumerical, "innovation covariance is not positive definite");
  const Mat63 K = llt.solve(model.H * s.P).transpose();
  KalmanState out;
  out.x = s.x + K * (z - model.H * s.x);
  // Joseph form keeps P symmetric positive definite.
  const Mat6 I_KH = Mat6::Identity() - K * model.H;
  out.P = symmetrized(I_KH * s.P * I_KH.transpose() + K * model.R * K.transpose());
  return out;
}

/// Predict, then update when a measurement is present.
inline KalmanState kf_step(const KalmanState& s, const MotionModel& model, const std::optional<Vec3>& z) {
  if (!is_positive_definite(s.P)) throw Error(ErrorCode::kNumerical, "state covariance is not positive definite");
  KalmanState pred = kf_predict(s, model);
  return z ? kf_update(pred, model, *z) : pred;
}

// ---------------------------------------------------------------------------
// Robust mixed Kalman / H-infinity filter.
//
// Uncertain system: x+ = (F + M1 G N) x + w,  y = (H + M2 G N) x + v,
// with G^T G <= I. The estimator is x+ = Fhat x + K y.
//
// Two Riccati recursions are carried: P bounds the estimation error
// (RMS bound) and P~ bounds the state second moment. alpha must dominate
// N P~ N^T, and P must stay below I / theta^2.
// ---------------------------------------------------------------------------

enum class RiccatiForm {
  // Filter matrices F1 = F, H1 = H and the cross term R12 enter directly;
  // reduces exactly to the Kalman filter when M1 = M2 = N = 0, theta = 0.
  kConsistent,
  // Gain/Riccati terms built from R1 = (P~^-1 - N^T N / alpha)^-1 F^T and
  // R2 = R1^-1 (P~^-1 - N^T N / alpha)^-1 R1^-T exactly as usually printed
  // (F1 = F + R11 R1^-1, H1 = H + R12^T R1^-1, extra R11 R2 R11^T). Does not
  // reduce to the Kalman filter; kept for comparison runs only.
  kPrinted,
};

struct RobustParams {
  double theta = 0.0;
  double alpha = 1.0;
  double epsilon = 1e-8;
  Eigen::MatrixXd M1 = Eigen::MatrixXd::Zero(6, 0);
  Eigen::MatrixXd M2 = Eigen::MatrixXd::Zero(3, 0);
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(0, 6);
  Mat6 S1 = Mat6::Identity();
  Mat6 S2 = Mat6::Identity();
  int max_alpha_doublings = 3;
  RiccatiForm form = RiccatiForm::kConsistent;
  // Missing measurement: false propagates with K = 0 (x <- F1 x); true
  // applies the full estimator matrix F^ = F1 - K H1 with the K.y term
  // dropped, which is the same as feeding y = 0.
  bool missing_uses_f_hat = false;

  void validate() const {
    if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidInput, "alpha must be positive");
    if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidInput, "epsilon must be positive");
    if (!(theta >= 0.0)) throw Error(ErrorCode::kInvalidInput, "theta must be non-negative");
    if (M1.rows() != 6 || M2.rows() != 3 || N.cols() != 6 || M1.cols() != M2.cols()) {
      throw Error(ErrorCode::kInvalidInput, "uncertainty matrices must be M1: 6xp, M2: 3xp, N: qx6");
    }
    if (!is_positive_definite(symmetrized(S1)) || !is_positive_definite(symmetrized(S2))) {
      throw Error(ErrorCode::kInvalidInput, "S1 and S2 must be symmetric positive definite");
    }
  }
};

/// Position-scaled uncertainty: M1 spans the acceleration input directions
/// (scaled by delta_process), M2 = delta_measurement I, N = [I 0].
inline void set_position_uncertainty(RobustParams& p, const MotionModel& model, double delta_process,
                                     double delta_measurement) {
  p.M1 = Eigen::MatrixXd::Zero(6, 3);
  p.M1.topRows<3>() = delta_process * Mat3::Identity();
  if (model.dt > 0.0) p.M1 = delta_process * model.B / model.dt;
  p.M2 = delta_measurement * Eigen::MatrixXd::Identity(3, 3);
  p.N = Eigen::MatrixXd::Zero(3, 6);
  p.N.leftCols(3).setIdentity();
}

/// Fixed realization of the norm-bounded uncertainty (Gamma^T Gamma <= I),
/// used to perturb the true dynamics in simulation and tests.
struct UncertaintyRealization {
  Eigen::MatrixXd Gamma;

  void validate(const RobustParams& p) const {
    if (Gamma.rows() != p.M1.cols() || Gamma.cols() != p.N.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "Gamma must be p x q");
    }
    if (Gamma.size() > 0 && Eigen::JacobiSVD<Eigen::MatrixXd>(Gamma).singularValues()(0) > 1.0 + 1e-12) {
      throw Error(ErrorCode::kInvalidInput, "Gamma has singular value above 1");
    }
  }

  /// True system matrices F + M1 Gamma N and H + M2 Gamma N.
  void perturb(const RobustParams& p, const MotionModel& nominal, Mat6& F, Mat36& H) const {
    validate(p);
    F = nominal.F;
    H = nominal.H;
    if (Gamma.size() == 0) return;
    F += p.M1 * Gamma * p.N;
    H += p.M2 * Gamma * p.N;
  }
};

struct RobustState {
  Vec6 x_hat = Vec6::Zero();  // one-step prediction x(k | k-1)
  Mat6 P = Mat6::Identity();
  Mat6 P_tilde = Mat6::Identity();
  std::int64_t k = 0;
  double alpha = 1.0;
};

inline RobustState rf_initial_state(const Vec6& x0, const RobustParams& params) {
  return {x0, symmetrized(params.S1), symmetrized(params.S2), 0, params.alpha};
}

/// Filtered output at step k: x(k | k) and its covariance.
struct RobustEstimate {
  Vec6 x = Vec6::Zero();
  Mat6 P = Mat6::Identity();
  bool prediction_only = false;
};

struct RobustStepResult {
  RobustState next;
  RobustEstimate estimate;
  Mat63 gain = Mat63::Zero();
};

/// One step of the robust recursion. Throws kInfeasibleTheta /
/// kInfeasibleAlpha when the feasibility conditions fail on entry, and
/// kNumerical when a required inverse does not exist.
inline RobustStepResult rf_step(const RobustState& s, const MotionModel& model, const RobustParams& params,
                                const std::optional<Vec3>& y) {
  using Eigen::MatrixXd;
  const double alpha = s.alpha;
  const Mat6 I6 = Mat6::Identity();
  const Mat6& F = model.F;
  const Mat36& H = model.H;

  if (params.theta > 0.0 && !is_positive_definite((1.0 / (params.theta * params.theta)) * I6 - s.P)) {
    throw Error(ErrorCode::kInfeasibleTheta, "P_k >= I / theta^2 at step " + std::to_string(s.k));
  }
  const MatrixXd NPN = params.N * s.P_tilde * params.N.transpose();
  const MatrixXd alpha_gap = alpha * MatrixXd::Identity(NPN.rows(), NPN.cols()) - NPN;
  if (!is_positive_definite(alpha_gap)) {
    throw Error(ErrorCode::kInfeasibleAlpha, "alpha I <= N P~ N^T at step " + std::to_string(s.k));
  }

  const Mat6 R11 = model.Q + alpha * params.M1 * params.M1.transpose();
  const Mat63 R12 = alpha * params.M1 * params.M2.transpose();
  const Mat3 R22 = model.R + alpha * params.M2 * params.M2.transpose();

  Eigen::FullPivLU<Mat6> p_lu(s.P);
  if (!p_lu.isInvertible()) throw Error(ErrorCode::kNumerical, "P_k is singular");
  Eigen::FullPivLU<Mat6> t_lu(p_lu.inverse() - params.theta * params.theta * I6);
  if (!t_lu.isInvertible()) throw Error(ErrorCode::kNumerical, "P_k^-1 - theta^2 I is singular");
  const Mat6 T = symmetrized(t_lu.inverse());

  Mat6 F1 = F;
  Mat36 H1 = H;
  Mat6 R2 = Mat6::Zero();
  Mat63 cross = R12;          // correlation term in the gain numerator
  Mat3 cross_meas = Mat3::Zero();
  Mat6 cross_state = Mat6::Zero();
  if (params.form == RiccatiForm::kPrinted) {
    Eigen::FullPivLU<Mat6> pt_lu(s.P_tilde);
    if (!pt_lu.isInvertible()) throw Error(ErrorCode::kNumerical, "P~_k is singular");
    Eigen::FullPivLU<Mat6> pi_lu(pt_lu.inverse() - params.N.transpose() * params.N / alpha);
    if (!pi_lu.isInvertible()) throw Error(ErrorCode::kNumerical, "P~^-1 - N^T N / alpha is singular");
    const Mat6 Pi = pi_lu.inverse();
    const Mat6 R1 = Pi * F.transpose();
    Eigen::FullPivLU<Mat6> r1_lu(R1);
    if (!r1_lu.isInvertible()) throw Error(ErrorCode::kNumerical, "R1 is singular");
    const Mat6 R1inv = r1_lu.inverse();
    R2 = R1inv * Pi * R1inv.transpose();
    F1 = F + R11 * R1inv;
    H1 = H + R12.transpose() * R1inv;
    cross = R11 * R2 * R12;
    cross_meas = R12.transpose() * R2 * R12;
    cross_state = R11 * R2 * R11.transpose();
  }

  RobustStepResult out;
  out.next.k = s.k + 1;
  out.next.alpha = alpha;

  Mat6 P_next = F1 * T * F1.transpose() + R11 + cross_state;
  if (y) {
    const Mat3 Rt = symmetrized(H1 * T * H1.transpose() + cross_meas + R22);
    Eigen::LLT<Mat3> rt_llt(Rt);
    if (rt_llt.info() != Eigen::Success) throw Error(ErrorCode::kNumerical, "R~_k is not positive definite");
    const Mat63 G = F1 * T * H1.transpose() + cross;
    const Mat63 K = rt_llt.solve(G.transpose()).transpose();
    const Mat6 F_hat = F1 - K * H1;
    out.gain = K;
    out.next.x_hat = F_hat * s.x_hat + K * *y;
    P_next -= G * rt_llt.solve(G.transpose());

    const Mat63 L = rt_llt.solve(H1 * T).transpose();  // T H1^T R~^-1
    out.estimate.x = s.x_hat + L * (*y - H1 * s.x_hat);
    out.estimate.P = symmetrized(T - L * H1 * T);
  } else {
    out.next.x_hat = F1 * s.x_hat;
    if (params.missing_uses_f_hat) {
      const Mat3 Rt = symmetrized(H1 * T * H1.transpose() + cross_meas + R22);
      const Mat63 G = F1 * T * H1.transpose() + cross;
      const Mat63 K = Rt.ldlt().solve(G.transpose()).transpose();
      out.next.x_hat = (F1 - K * H1) * s.x_hat;
    }
    out.estimate.x = s.x_hat;
    out.estimate.P = s.P;
    out.estimate.prediction_only = true;
  }
  out.next.P = symmetrized(P_next + params.epsilon * I6);

  MatrixXd tilde_growth = MatrixXd::Zero(6, 6);
  if (params.N.rows() > 0) {
    tilde_growth = F * s.P_tilde * params.N.transpose() * alpha_gap.ldlt().solve(params.N * s.P_tilde * F.transpose());
  }
  out.next.P_tilde = symmetrized(F * s.P_tilde * F.transpose() + tilde_growth + R11 + params.epsilon * I6);

  if (!out.next.P.allFinite() || !out.next.P_tilde.allFinite()) {
    throw Error(ErrorCode::kNumerical, "Riccati recursion produced non-finite values");
  }
  return out;
}

/// rf_step with the alpha policy: on kInfeasibleAlpha, double alpha and
/// retry (at most params.max_alpha_doublings times), then rethrow.
class RobustFilter {
 public:
  RobustFilter(const Vec6& x0, RobustParams params) : params_(std::move(params)), state_(rf_initial_state(x0, params_)) {
    params_.validate();
  }

  RobustEstimate step(const MotionModel& model, const std::optional<Vec3>& y) {
    for (int attempt = 0;; ++attempt) {
      try {
        RobustStepResult r = rf_step(state_, model, params_, y);
        state_ = r.next;
        return r.estimate;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInfeasibleAlpha || doublings_ >= params_.max_alpha_doublings) throw;
        state_.alpha *= 2.0;
        ++doublings_;
      }
    }
  }

  const RobustState& state() const { return state_; }
  const RobustParams& params() const { return params_; }
  int alpha_doublings() const { return doublings_; }

 private:
  RobustParams params_;
  RobustState state_;
  int doublings_ = 0;
};

enum class FilterKind { kKalman, kRobust };

/// Filtered position estimate of one marker at one frame.
struct TrackPoint {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 P = Mat3::Identity();  // position block of the filter covariance
  bool prediction_only = false;
};

/// One marker followed by both filters. Starts on the first measurement
/// (zero velocity, covariance S1); afterwards every frame yields an
/// estimate, prediction-only while the marker is unseen.
class MarkerTracker {
 public:
  MarkerTracker(MotionModel model, RobustParams params) : model_(std::move(model)), params_(std::move(params)) {
    params_.validate();
  }

  struct Output {
    std::optional<TrackPoint> kalman;
    std::optional<TrackPoint> robust;
  };

  Output step(const std::optional<Vec3>& z) {
    Output out;
    if (!kf_) {
      if (!z) return out;
      Vec6 x0 = Vec6::Zero();
      x0.head<3>() = *z;
      kf_ = kf_update(KalmanState{x0, symmetrized(params_.S1)}, model_, *z);
      rf_.emplace(x0, params_);
      out.kalman = to_point(kf_->x, kf_->P, false);
      const RobustEstimate e = rf_->step(model_, z);
      out.robust = to_point(e.x, e.P, false);
      return out;
    }
    kf_ = kf_step(*kf_, model_, z);
    out.kalman = to_point(kf_->x, kf_->P, !z);
    const RobustEstimate e = rf_->step(model_, z);
    out.robust = to_point(e.x, e.P, e.prediction_only);
    return out;
  }

  bool started() const { return kf_.has_value(); }
  const RobustFilter* robust() const { return rf_ ? &*rf_ : nullptr; }

 private:
  static TrackPoint to_point(const Vec6& x, const Mat6& P, bool prediction_only) {
    return {x.head<3>(), x.tail<3>(), P.topLeftCorner<3, 3>(), prediction_only};
  }

  MotionModel model_;
  RobustParams params_;
  std::optional<KalmanState> kf_;
  std::optional<RobustFilter> rf_;
};

/// Runs one filter over a measurement sequence with gaps.
inline std::vector<std::optional<TrackPoint>> track_marker(std::span<const std::optional<Vec3>> measurements,
                                                           const MotionModel& model, const RobustParams& params,
                                                           FilterKind kind) {
  MarkerTracker tracker(model, params);
  std::vector<std::optional<TrackPoint>> out;
  out.reserve(measurements.size());
  for (const auto& z : measurements) {
    auto o = tracker.step(z);
    out.push_back(kind == FilterKind::kKalman ? o.kalman : o.robust);
  }
  return out;
}

}  // namespace rgbdtrack
