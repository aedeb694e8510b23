#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "multiscout/tracking.hpp"
#include "test_util.hpp"

using namespace multiscout;

namespace {

Vector4 as_meas(const TargetState& s) { return {s.pos(0), s.pos(1), s.vel(0), s.vel(1)}; }

std::vector<Vector4> noisy(const std::vector<TargetState>& truth, const Matrix4& r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const Matrix4 l = r.llt().matrixL();
  std::vector<Vector4> out;
  for (const auto& s : truth) {
    Vector4 w(g(rng), g(rng), g(rng), g(rng));
    out.push_back(as_meas(s) + l * w);
  }
  return out;
}

Matrix4 random_spd(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix4 a;
  for (int i = 0; i < 16; ++i) a.data()[i] = g(rng);
  return a * a.transpose() + 0.1 * Matrix4::Identity();
}

}  // namespace

TEST_CASE("kf transition block form") {
  const Matrix4 f = kf_transition(2.0);
  Matrix4 expect = Matrix4::Identity();
  expect(0, 2) = expect(1, 3) = 2.0;
  CHECK(f == expect);
}

TEST_CASE("huge R ignores the measurement") {
  NoiseModel n;
  n.R = 1e12 * Matrix4::Identity();
  KfState s{Vector4(1, 2, 3, 4), Matrix4::Identity()};
  const auto pred = kf_predict(s, n);
  const auto post = kf_update(pred, Vector4(100, -50, 7, 9), n);
  CHECK((post.x - pred.x).norm() < 1e-8);
}

TEST_CASE("noise-free constant velocity is recovered exactly after two steps") {
  NoiseModel n;
  n.Q.setZero();
  n.R = 1e-12 * Matrix4::Identity();
  const Vector4 truth0(10, 20, 3, -1);
  KfState s{Vector4(0, 0, 0, 0), 100.0 * Matrix4::Identity()};
  Vector4 x = truth0;
  for (int k = 0; k < 2; ++k) {
    x = kf_transition(1.0) * x;
    s = kf_step(s, x, n);
  }
  CHECK((s.x - x).norm() < 1e-6);
}

TEST_CASE("kf update rejects a singular innovation covariance") {
  NoiseModel n;
  n.R.setZero();
  KfState s{Vector4::Zero(), Matrix4::Zero()};
  CHECK_THROWS(kf_update(s, Vector4::Zero(), n));
}

TEST_CASE("ekf jacobians match central differences") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(-500, 500), spd(0.5, 40), ang(-kPi, kPi);
  for (int i = 0; i < 100; ++i) {
    const Vector4 x(pos(rng), pos(rng), spd(rng), ang(rng));
    const double h = 1e-6;
    const Matrix4 fj = ekf_f_jacobian(x, 1.0), hj = ekf_h_jacobian(x);
    for (int c = 0; c < 4; ++c) {
      Vector4 xp = x, xm = x;
      xp(c) += h;
      xm(c) -= h;
      const Vector4 dfd = (ekf_f(xp, 1.0) - ekf_f(xm, 1.0)) / (2 * h);
      const Vector4 dhd = (ekf_h(xp) - ekf_h(xm)) / (2 * h);
      CHECK((dfd - fj.col(c)).norm() <= 1e-6 * std::max(1.0, fj.col(c).norm()));
      CHECK((dhd - hj.col(c)).norm() <= 1e-6 * std::max(1.0, hj.col(c).norm()));
    }
  }
}

TEST_CASE("ekf prediction is exact on a straight line") {
  NoiseModel n;
  n.Q.setZero();
  EkfState s;
  s.x = Vector4(5, 5, 10, deg2rad(30));
  for (int k = 1; k <= 5; ++k) {
    s = ekf_predict(s, n);
    CHECK(s.x(0) == doctest::Approx(5 + 10 * k * std::cos(deg2rad(30))));
    CHECK(s.x(1) == doctest::Approx(5 + 10 * k * std::sin(deg2rad(30))));
  }
}

TEST_CASE("ekf heading wraps near pi") {
  NoiseModel n;
  EkfState s;
  s.x = Vector4(0, 0, 10, kPi - 0.01);
  s.P = Matrix4::Identity();
  const double target = kPi + 0.02;  // measured heading just past pi
  const Vector4 z(10 * std::cos(kPi - 0.01), 10 * std::sin(kPi - 0.01), 10 * std::cos(target), 10 * std::sin(target));
  const auto post = ekf_step(s, z, n);
  CHECK(post.x(3) > -kPi);
  CHECK(post.x(3) <= kPi);
  CHECK(std::abs(wrap_radians(post.x(3) - (kPi - 0.01))) < 0.1);
}

TEST_CASE("ekf flags a zero-speed state") {
  NoiseModel n;
  EkfState s;
  s.x = Vector4(0, 0, 0, 0);
  s.P = Matrix4::Identity();
  n.Q.setZero();
  const auto post = ekf_update(s, Vector4(0, 0, 0, 0), n);
  CHECK(post.degenerate);
}

TEST_CASE("covariances stay symmetric PSD and posterior residuals shrink") {
  std::mt19937_64 rng(10);
  const NoiseModel n;
  for (int trial = 0; trial < 50; ++trial) {
    KfState s{Vector4::Random() * 100.0, random_spd(rng)};
    const Vector4 z = Vector4::Random() * 100.0;
    const auto pred = kf_predict(s, n);
    const auto post = kf_update(pred, z, n);
    CHECK(min_eigenvalue(pred.P) >= -1e-9);
    CHECK(min_eigenvalue(post.P) >= -1e-9);
    CHECK((post.P - post.P.transpose()).norm() == 0.0);
    // In the R^-1 weighted norm the posterior residual never exceeds the prior one.
    const Eigen::LLT<Matrix4> rl(n.R);
    const double prior = rl.matrixL().solve(z - pred.x).norm();
    const double after = rl.matrixL().solve(z - post.x).norm();
    CHECK(after <= prior + 1e-12);
  }
}

TEST_CASE("posterior residual shrinks in the Euclidean norm along default-parameter tracks") {
  MotionProfile p;
  p.kind = MotionKind::Circular;
  const auto truth = generate_motion(p, 3);
  const NoiseModel n;
  const auto z = noisy(truth, n.R, 4);
  KfState s{z[0], initial_covariance()};
  for (std::size_t k = 1; k < z.size(); ++k) {
    const auto pred = kf_predict(s, n);
    s = kf_update(pred, z[k], n);
    CHECK((z[k] - s.x).norm() <= (z[k] - pred.x).norm() + 1e-12);
  }
}

TEST_CASE("motion generators") {
  MotionProfile lin;
  lin.speed_jitter_frac = 0.0;
  lin.start_heading_rad = deg2rad(20);
  const auto a = generate_motion(lin, 1);
  REQUIRE(a.size() == 61);
  for (std::size_t k = 1; k < a.size(); ++k) {
    CHECK((a[k].pos - a[k - 1].pos).norm() == doctest::Approx(lin.nominal_speed_mps));
    const Eigen::Vector2d d = a[k].pos - a[0].pos;
    CHECK(std::abs(d.x() * std::sin(deg2rad(20)) - d.y() * std::cos(deg2rad(20))) < 1e-9);
  }

  MotionProfile circ;
  circ.kind = MotionKind::Circular;
  circ.speed_jitter_frac = 0.0;
  circ.num_steps = 120;
  circ.turn_rate_rad_s = 2.0 * kPi / circ.num_steps;
  const auto c = generate_motion(circ, 1);
  const double h0 = std::atan2(c.front().vel(1), c.front().vel(0));
  const double h1 = std::atan2(c.back().vel(1), c.back().vel(0));
  CHECK(std::abs(wrap_radians(h1 - h0)) < 1e-9);
  CHECK((c.back().pos - c.front().pos).norm() < 1e-6);

  MotionProfile jit;
  const auto j = generate_motion(jit, 5);
  for (const auto& s : j) {
    CHECK(s.vel.norm() >= 0.95 * jit.nominal_speed_mps - 1e-12);
    CHECK(s.vel.norm() <= 1.05 * jit.nominal_speed_mps + 1e-12);
  }
  CHECK(generate_motion(jit, 5)[7].pos == j[7].pos);
  jit.speed_jitter_frac = 0.3;
  CHECK_THROWS(jit.validate());
}

TEST_CASE("exact measurements track with negligible error") {
  MotionProfile p;
  p.speed_jitter_frac = 0.0;
  const auto truth = generate_motion(p, 2);
  std::vector<Vector4> z;
  for (const auto& s : truth) z.push_back(as_meas(s));
  for (auto f : {FilterKind::Kf, FilterKind::Ekf}) {
    const auto r = track_sequence(z, f, NoiseModel{}, truth);
    CHECK(std::isfinite(r.filter_error_total));
    CHECK(r.measurement_error_total == 0.0);
    for (std::size_t k = 5; k < r.filter_errors.size(); ++k) CHECK(r.filter_errors[k] <= 1e-2);
  }
}

TEST_CASE("filter orderings with measurement noise drawn from R") {
  const NoiseModel n;
  MotionProfile lin;
  lin.start_pos = {20, 120};
  lin.start_heading_rad = deg2rad(20);
  MotionProfile circ;
  circ.kind = MotionKind::Circular;
  circ.start_pos = {250, 60};
  const auto tl = generate_motion(lin, 6);
  const auto tc = generate_motion(circ, 7);
  const auto zl = noisy(tl, n.R, 8);
  const auto zc = noisy(tc, n.R, 9);
  const auto kl = track_sequence(zl, FilterKind::Kf, n, tl);
  const auto el = track_sequence(zl, FilterKind::Ekf, n, tl);
  const auto kc = track_sequence(zc, FilterKind::Kf, n, tc);
  const auto ec = track_sequence(zc, FilterKind::Ekf, n, tc);
  MESSAGE("linear meas/kf/ekf " << kl.measurement_error_total << " " << kl.filter_error_total << " "
                                << el.filter_error_total << "; circular " << kc.measurement_error_total << " "
                                << kc.filter_error_total << " " << ec.filter_error_total);
  CHECK(kl.filter_error_total < kl.measurement_error_total);
  CHECK(el.filter_error_total < el.measurement_error_total);
  CHECK(ec.filter_error_total < kc.measurement_error_total);
  CHECK(kc.measurement_error_total < kc.filter_error_total);
  for (const auto* r : {&kl, &el, &kc, &ec}) CHECK(r->min_cov_eigenvalue >= -1e-9);
}

TEST_CASE("track_sequence argument checks and csv") {
  const NoiseModel n;
  CHECK_THROWS(track_sequence({Vector4::Zero()}, FilterKind::Kf, n));
  MotionProfile p;
  const auto truth = generate_motion(p, 1);
  std::vector<Vector4> z;
  for (const auto& s : truth) z.push_back(as_meas(s));
  CHECK_THROWS(track_sequence(std::vector<Vector4>(z.begin(), z.begin() + 5), FilterKind::Kf, n, truth));
  NoiseModel bad;
  bad.R(0, 0) = -1.0;
  CHECK_THROWS(track_sequence(z, FilterKind::Kf, bad));

  const auto r = track_sequence(z, FilterKind::Ekf, n, truth);
  const auto path = std::filesystem::temp_directory_path() / "multiscout_track.csv";
  write_track_csv(z, r, truth, path);
  std::ifstream in(path);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(z.size()));
  std::filesystem::remove(path);
}
