#include "multiscout/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include "multiscout/rng.hpp"

namespace multiscout {
namespace {

Matrix4 symmetrize(const Matrix4& p) { return 0.5 * (p + p.transpose()); }

bool is_psd(const Matrix4& m) { return min_eigenvalue(m) >= -1e-12 * std::max(1.0, m.norm()); }

}  // namespace

void NoiseModel::validate() const {
  if (!(dt_s > 0.0)) throw std::invalid_argument("NoiseModel: dt_s must be positive");
  if (!is_psd(Q)) throw std::invalid_argument("NoiseModel: Q must be positive semi-definite");
  if (!is_psd(R)) throw std::invalid_argument("NoiseModel: R must be positive semi-definite");
}

double min_eigenvalue(const Matrix4& p) {
  return Eigen::SelfAdjointEigenSolver<Matrix4>(symmetrize(p), Eigen::EigenvaluesOnly).eigenvalues()(0);
}

Matrix4 kf_transition(double dt) {
  Matrix4 f = Matrix4::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

KfState kf_predict(const KfState& state, const NoiseModel& noise) {
  const Matrix4 f = kf_transition(noise.dt_s);
  return {f * state.x, symmetrize(f * state.P * f.transpose() + noise.Q)};
}

KfState kf_update(const KfState& predicted, const Vector4& z, const NoiseModel& noise) {
  const Matrix4 s = predicted.P + noise.R;  // H = I
  const Eigen::FullPivLU<Matrix4> lu(s);
  if (!lu.isInvertible()) throw std::invalid_argument("kf_update: singular innovation covariance");
  const Matrix4 k = predicted.P * lu.inverse();
  KfState out;
  out.x = predicted.x + k * (z - predicted.x);
  out.P = symmetrize((Matrix4::Identity() - k) * predicted.P);
  return out;
}

KfState kf_step(const KfState& state, const Vector4& z, const NoiseModel& noise) {
  return kf_update(kf_predict(state, noise), z, noise);
}

Vector4 ekf_f(const Vector4& x, double dt) {
  return {x(0) + dt * x(2) * std::cos(x(3)), x(1) + dt * x(2) * std::sin(x(3)), x(2), x(3)};
}

Matrix4 ekf_f_jacobian(const Vector4& x, double dt) {
  const double c = std::cos(x(3));
  const double s = std::sin(x(3));
  Matrix4 f = Matrix4::Identity();
  f(0, 2) = dt * c;
  f(0, 3) = -dt * x(2) * s;
  f(1, 2) = dt * s;
  f(1, 3) = dt * x(2) * c;
  return f;
}

Vector4 ekf_h(const Vector4& x) {
  return {x(0), x(1), x(2) * std::cos(x(3)), x(2) * std::sin(x(3))};
}

Matrix4 ekf_h_jacobian(const Vector4& x) {
  const double c = std::cos(x(3));
  const double s = std::sin(x(3));
  Matrix4 h = Matrix4::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  h(2, 2) = c;
  h(2, 3) = -x(2) * s;
  h(3, 2) = s;
  h(3, 3) = x(2) * c;
  return h;
}

EkfState ekf_predict(const EkfState& state, const NoiseModel& noise) {
  const Matrix4 f = ekf_f_jacobian(state.x, noise.dt_s);
  EkfState out = state;
  out.x = ekf_f(state.x, noise.dt_s);
  out.x(3) = wrap_radians(out.x(3));
  out.P = symmetrize(f * state.P * f.transpose() + noise.Q);
  return out;
}

EkfState ekf_update(const EkfState& predicted, const Vector4& z, const NoiseModel& noise) {
  const Matrix4 h = ekf_h_jacobian(predicted.x);
  const Matrix4 s = h * predicted.P * h.transpose() + noise.R;
  const Eigen::FullPivLU<Matrix4> lu(s);
  if (!lu.isInvertible()) throw std::invalid_argument("ekf_update: singular innovation covariance");
  const Matrix4 k = predicted.P * h.transpose() * lu.inverse();
  EkfState out;
  out.x = predicted.x + k * (z - ekf_h(predicted.x));
  out.x(3) = wrap_radians(out.x(3));
  out.P = symmetrize((Matrix4::Identity() - k * h) * predicted.P);
  out.degenerate = predicted.x(2) == 0.0;
  return out;
}

EkfState ekf_step(const EkfState& state, const Vector4& z, const NoiseModel& noise) {
  return ekf_update(ekf_predict(state, noise), z, noise);
}

void MotionProfile::validate() const {
  if (speed_jitter_frac < 0.0 || speed_jitter_frac > 0.2)
    throw std::invalid_argument("MotionProfile: speed_jitter_frac must be in [0, 0.2]");
  if (!std::isfinite(turn_rate_rad_s)) throw std::invalid_argument("MotionProfile: turn rate must be finite");
  if (num_steps < 1) throw std::invalid_argument("MotionProfile: num_steps must be >= 1");
  if (!(dt_s > 0.0)) throw std::invalid_argument("MotionProfile: dt_s must be positive");
  if (!(nominal_speed_mps >= 0.0)) throw std::invalid_argument("MotionProfile: speed must be >= 0");
}

std::vector<TargetState> generate_motion(const MotionProfile& profile, std::uint64_t seed) {
  profile.validate();
  Rng rng(derive_seed(seed, SeedStream::Motion, 0));
  std::uniform_real_distribution<double> jitter(-profile.speed_jitter_frac, profile.speed_jitter_frac);
  const double omega = profile.kind == MotionKind::Circular ? profile.turn_rate_rad_s : 0.0;

  std::vector<TargetState> states;
  states.reserve(static_cast<std::size_t>(profile.num_steps) + 1);
  Eigen::Vector2d pos = profile.start_pos;
  double heading = profile.start_heading_rad;
  for (int k = 0; k <= profile.num_steps; ++k) {
    const double speed = profile.nominal_speed_mps * (1.0 + jitter(rng));
    const Eigen::Vector2d vel = speed * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    states.push_back({pos, vel});
    pos += profile.dt_s * vel;
    heading = wrap_radians(heading + omega * profile.dt_s);
  }
  return states;
}

Matrix4 initial_covariance() { return Vector4(100.0, 100.0, 25.0, 25.0).asDiagonal(); }

TrackResult track_sequence(const std::vector<Vector4>& measurements, FilterKind filter,
                           const NoiseModel& noise, const std::vector<TargetState>& truth) {
  noise.validate();
  if (measurements.size() < 2) throw std::invalid_argument("track_sequence: need at least 2 measurements");
  if (!truth.empty() && truth.size() != measurements.size())
    throw std::invalid_argument("track_sequence: truth and measurements differ in length");
  for (const auto& t : truth)
    if (t.pos.size() != 2) throw std::invalid_argument("track_sequence: truth must be 2D");

  TrackResult res;
  double min_eig = std::numeric_limits<double>::infinity();
  auto observe = [&](const Matrix4& p) { min_eig = std::min(min_eig, min_eigenvalue(p)); };

  const Vector4& z0 = measurements.front();
  if (filter == FilterKind::Kf) {
    KfState s{z0, initial_covariance()};
    res.estimates.push_back(s.x);
    for (std::size_t i = 1; i < measurements.size(); ++i) {
      const auto pred = kf_predict(s, noise);
      observe(pred.P);
      s = kf_update(pred, measurements[i], noise);
      observe(s.P);
      res.estimates.push_back(s.x);
    }
  } else {
    EkfState s;
    s.x = {z0(0), z0(1), std::hypot(z0(2), z0(3)), std::atan2(z0(3), z0(2))};
    s.P = initial_covariance();
    auto to_cartesian = [](const Vector4& x) {
      return Vector4(x(0), x(1), x(2) * std::cos(x(3)), x(2) * std::sin(x(3)));
    };
    res.estimates.push_back(to_cartesian(s.x));
    for (std::size_t i = 1; i < measurements.size(); ++i) {
      const auto pred = ekf_predict(s, noise);
      observe(pred.P);
      s = ekf_update(pred, measurements[i], noise);
      observe(s.P);
      res.degenerate = res.degenerate || s.degenerate;
      res.estimates.push_back(to_cartesian(s.x));
    }
  }
  res.min_cov_eigenvalue = min_eig;

  for (std::size_t i = 0; i < truth.size(); ++i) {
    const Eigen::Vector2d p = truth[i].pos;
    const double em = (measurements[i].head<2>() - p).norm();
    const double ef = (res.estimates[i].head<2>() - p).norm();
    res.measurement_errors.push_back(em);
    res.filter_errors.push_back(ef);
    res.measurement_error_total += em;
    res.filter_error_total += ef;
  }
  return res;
}

void write_track_csv(const std::vector<Vector4>& measurements, const TrackResult& result,
                     const std::vector<TargetState>& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_track_csv: cannot open " + path.string());
  out << "step,truth_x,truth_y,meas_x,meas_y,filt_x,filt_y,speed_mps,heading_deg,meas_error_m,filt_error_m\n";
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < result.estimates.size(); ++i) {
    const auto& e = result.estimates[i];
    const bool t = i < truth.size();
    out << i << ',' << (t ? truth[i].pos(0) : NAN) << ',' << (t ? truth[i].pos(1) : NAN) << ','
        << measurements[i](0) << ',' << measurements[i](1) << ',' << e(0) << ',' << e(1) << ','
        << std::hypot(e(2), e(3)) << ',' << rad2deg(std::atan2(e(3), e(2))) << ','
        << (t ? result.measurement_errors[i] : NAN) << ',' << (t ? result.filter_errors[i] : NAN) << '\n';
  }
}

}  // namespace multiscout
