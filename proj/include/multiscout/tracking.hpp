#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "multiscout/common.hpp"
#include "multiscout/scene.hpp"

namespace multiscout {

using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;

struct NoiseModel {
  Matrix4 Q = Vector4(1e-4, 1e-4, 1e-2, 1e-2).asDiagonal();
  Matrix4 R = Vector4(10.0, 10.0, 1.0, 1.0).asDiagonal();
  double dt_s = 1.0;

  void validate() const;
};

// [x, y, v_x, v_y]
struct KfState {
  Vector4 x = Vector4::Zero();
  Matrix4 P = Matrix4::Identity();
};

// [x, y, v, theta]
struct EkfState {
  Vector4 x = Vector4::Zero();
  Matrix4 P = Matrix4::Identity();
  bool degenerate = false;  // v == 0 left heading unobservable at the last update
};

Matrix4 kf_transition(double dt);
KfState kf_predict(const KfState& state, const NoiseModel& noise);
KfState kf_update(const KfState& predicted, const Vector4& z, const NoiseModel& noise);
KfState kf_step(const KfState& state, const Vector4& z, const NoiseModel& noise);

Vector4 ekf_f(const Vector4& x, double dt);
Matrix4 ekf_f_jacobian(const Vector4& x, double dt);
Vector4 ekf_h(const Vector4& x);
Matrix4 ekf_h_jacobian(const Vector4& x);
EkfState ekf_predict(const EkfState& state, const NoiseModel& noise);
EkfState ekf_update(const EkfState& predicted, const Vector4& z, const NoiseModel& noise);
EkfState ekf_step(const EkfState& state, const Vector4& z, const NoiseModel& noise);

// Smallest eigenvalue of the symmetric part.
double min_eigenvalue(const Matrix4& p);

enum class MotionKind { Linear, Circular };

struct MotionProfile {
  MotionKind kind = MotionKind::Linear;
  double nominal_speed_mps = 10.0;
  double speed_jitter_frac = 0.05;  // per-step speed factor uniform in 1 +- jitter
  double turn_rate_rad_s = 3.0 * kPi / 180.0;  // circular only
  Eigen::Vector2d start_pos{100.0, 150.0};
  double start_heading_rad = 0.0;
  int num_steps = 60;
  double dt_s = 1.0;

  void validate() const;
};

// num_steps + 1 states. State k moves with heading theta_k
// (theta_{k+1} = theta_k + turn_rate * dt when circular).
std::vector<TargetState> generate_motion(const MotionProfile& profile, std::uint64_t seed);

enum class FilterKind { Kf, Ekf };

struct TrackResult {
  std::vector<Vector4> estimates;      // [x, y, v_x, v_y] per step
  std::vector<double> measurement_errors;  // |z_pos - truth|, filled when truth is given
  std::vector<double> filter_errors;
  double measurement_error_total = 0.0;
  double filter_error_total = 0.0;
  double min_cov_eigenvalue = 0.0;  // over every predict and update
  bool degenerate = false;
};

Matrix4 initial_covariance();

// The first measurement seeds the state with P0 = initial_covariance(); each
// later measurement is one predict/update. truth may be empty.
TrackResult track_sequence(const std::vector<Vector4>& measurements, FilterKind filter,
                           const NoiseModel& noise, const std::vector<TargetState>& truth = {});

// step, truth, measured, filtered, speed, heading, errors.
void write_track_csv(const std::vector<Vector4>& measurements, const TrackResult& result,
                     const std::vector<TargetState>& truth, const std::filesystem::path& path);

}  // namespace multiscout
