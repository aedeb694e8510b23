// Acceptance suite: one PASS/FAIL line per criterion. Exit status 0 only when
// every selected criterion passes.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "multiscout/harness/runner.hpp"

using namespace multiscout;

namespace {

// Tolerances and thresholds.
constexpr double kGeometryTol = 0.05;
constexpr double kGeometryMaxSeconds = 1.0;
constexpr double kCafRelTol = 1e-6;
constexpr double kCafMaxSeconds = 30.0;
constexpr double kMcPositionM = 10.0;
constexpr double kMcRangeRmsM = 3.0;
constexpr double kMcSpeedMps = 0.5;
constexpr double kMcAngleDeg = 2.0;
constexpr double kBiasRecoverNs = 1.0;
constexpr double kBiasRecoverPosM = 1e-3;
constexpr double kBiasMcPositionM = 10.0;
constexpr double kThreeDPositionM = 15.0;
constexpr double kAssocAccuracy = 0.95;
constexpr double kAssocCostRatio = 100.0;
constexpr double kEkfOverKfCircular = 0.25;
constexpr double kKfOverEkfLinear = 1.2;
constexpr double kTrilatJacRel = 1e-5;
constexpr double kEkfJacRel = 1e-6;
constexpr int kMcTrials = 100;
constexpr int kTrackSeeds = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Vector v2(double x, double y) { return Vector{{x, y}}; }

std::string fmtd(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome geometry() {
  const auto t0 = std::chrono::steady_clock::now();
  const Vector t = v2(250.0, 433.0 / 3.0);
  const Vector p = v2(67.18, 423.72);
  const double heading = -100.68 * kPi / 180.0;
  const Vector v = v2(24.17 * std::cos(heading), 24.17 * std::sin(heading));
  const std::vector<Vector> rx{v2(0, 0), v2(500, 0), v2(250, 433)};
  const double b_ref[] = {762.89, 939.58, 516.94};
  const double v_ref[] = {-41.58, -30.83, -11.74};
  double worst = 0.0;
  for (int m = 0; m < 3; ++m) {
    worst = std::max(worst, std::abs(bistatic_range(p, t, rx[m]) - b_ref[m]));
    worst = std::max(worst, std::abs(bistatic_radial_velocity(p, v, t, rx[m]) - v_ref[m]));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= kGeometryTol && secs < kGeometryMaxSeconds,
          "max deviation " + fmtd("%.4f", worst) + " (tol 0.05), " + fmtd("%.4f", secs) + " s"};
}

Outcome caf_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  WaveformConfig wc;
  wc.num_symbols = 4;
  const auto frame = generate_frame(wc);
  const DopplerGrid grid{400.0, 41};
  const int bins = 32;
  ReceiverCapture cap;
  cap.sample_rate_hz = frame.sample_rate_hz;
  cap.samples.assign(frame.size(), Complex{});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.1);
  const long n_tot = static_cast<long>(frame.size());
  for (long n = 0; n < n_tot; ++n) {
    Complex s{g(rng), g(rng)};
    if (n >= 13) s += 0.7 * frame.samples[n - 13] * std::polar(1.0, 2.0 * kPi * 140.0 * n / frame.sample_rate_hz);
    if (n >= 27) s += 0.4 * frame.samples[n - 27] * std::polar(1.0, -2.0 * kPi * 260.0 * n / frame.sample_rate_hz);
    cap.samples[n] = s;
  }
  const auto fast = compute_caf(cap, frame, bins, grid);
  double num = 0.0, den = 0.0;
  for (int d = 0; d < bins; ++d)
    for (int k = 0; k < grid.points; ++k) {
      const double f = grid.value(k);
      Complex acc{};
      for (long n = 0; n + d < n_tot; ++n)
        acc += cap.samples[n + d] * std::conj(frame.samples[n]) *
               std::polar(1.0, -2.0 * kPi * f * static_cast<double>(n) / frame.sample_rate_hz);
      num = std::max(num, std::abs(fast.caf(d, k) - acc));
      den = std::max(den, std::abs(acc));
    }
  const double rel = num / den;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {rel <= kCafRelTol && secs < kCafMaxSeconds,
          "max error / max |CAF| = " + fmtd("%.2e", rel) + " on 32x41, " + fmtd("%.2f", secs) + " s"};
}

MetricsReport mc(Mode base, int threads) {
  auto cfg = montecarlo_config(base);
  cfg.trials = kMcTrials;
  cfg.threads = threads;
  return run_trials(cfg);
}

Outcome single_mc(int threads) {
  const auto a = mc(Mode::Single, threads).aggregate;
  const bool ok = a.succeeded > 0 && a.position_error_m <= kMcPositionM && a.rms_range_error_m <= kMcRangeRmsM &&
                  a.speed_error_mps <= kMcSpeedMps && a.angle_error_deg <= kMcAngleDeg;
  return {ok, fmtd("position %.3f m", a.position_error_m) + fmtd(", range RMS %.3f m", a.rms_range_error_m) +
                  fmtd(", speed %.3f m/s", a.speed_error_mps) + fmtd(", angle %.3f deg", a.angle_error_deg) + ", " +
                  std::to_string(a.succeeded) + "/" + std::to_string(a.trials) + " trials"};
}

Outcome clock_bias(int threads) {
  // Exact ranges on random four-receiver scenes with an injected bias.
  const Scene base = four_receiver_scene();
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(20.0, 480.0);
  double worst_ns = 0.0, worst_pos = 0.0;
  for (double delta_ns : {50.0, 200.0}) {
    for (int i = 0; i < 10; ++i) {
      const Vector p = v2(u(rng), u(rng));
      BistaticMeasurementSet meas;
      meas.transmitter_pos = base.transmitter_pos;
      meas.receiver_positions = base.receivers;
      for (const auto& r : base.receivers)
        meas.ranges_m.push_back(bistatic_range(p, base.transmitter_pos, r) + kSpeedOfLight * delta_ns * 1e-9);
      SolverSettings s;
      s.seed = static_cast<std::uint64_t>(i + 1);
      const auto fix = trilaterate(meas, s, true);
      worst_ns = std::max(worst_ns, std::abs(fix.clock_bias_s.value_or(0.0) * 1e9 - delta_ns));
      worst_pos = std::max(worst_pos, (fix.pos - p).norm());
    }
  }
  const auto a = mc(Mode::Bias, threads).aggregate;
  const bool ok = worst_ns <= kBiasRecoverNs && worst_pos <= kBiasRecoverPosM && a.succeeded > 0 &&
                  a.position_error_m <= kBiasMcPositionM;
  return {ok, fmtd("noiseless bias error %.2e ns", worst_ns) + fmtd(", position %.2e m", worst_pos) +
                  fmtd("; noisy MC position %.3f m", a.position_error_m) + ", " + std::to_string(a.succeeded) + "/" +
                  std::to_string(a.trials) + " trials"};
}

Outcome three_d(int threads) {
  const auto a = mc(Mode::ThreeD, threads).aggregate;
  BistaticMeasurementSet coplanar;
  coplanar.transmitter_pos = Vector{{125.0, 125.0, 125.0}};
  coplanar.receiver_positions = {Vector{{0.0, 0.0, 0.0}}, Vector{{500.0, 0.0, 0.0}}, Vector{{0.0, 500.0, 0.0}},
                                 Vector{{500.0, 500.0, 0.0}}};
  coplanar.ranges_m = {900.0, 900.0, 900.0, 900.0};
  bool refused = false;
  try {
    trilaterate(coplanar, SolverSettings{}, false);
  } catch (const std::invalid_argument&) {
    refused = true;
  }
  return {a.succeeded > 0 && a.position_error_m <= kThreeDPositionM && refused,
          fmtd("MC position %.3f m", a.position_error_m) + ", " + std::to_string(a.succeeded) + "/" +
              std::to_string(a.trials) + " trials, coplanar " + (refused ? "refused" : "accepted")};
}

Outcome association(int threads) {
  const auto rep = mc(Mode::Multi, threads);
  const auto& a = rep.aggregate;
  auto fixed_cfg = default_config(Mode::Multi);
  const auto fixed = run_trials(fixed_cfg);
  double lo = 0.0, hi = 0.0;
  std::size_t hyps = 0;
  bool fixed_ok = false;
  if (fixed.trials[0].ok && fixed.trials[0].association) {
    const auto& tab = fixed.trials[0].association->table;
    hyps = tab.size();
    lo = std::numeric_limits<double>::infinity();
    for (const auto& h : tab) {
      lo = std::min(lo, h.total_cost);
      hi = std::max(hi, h.total_cost);
    }
    fixed_ok = fixed.trials[0].association_correct;
  }
  const double ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  const double all_rate = static_cast<double>(a.association_correct) / a.trials;
  const bool ok = a.succeeded > 0 && a.association_accuracy >= kAssocAccuracy && ratio > kAssocCostRatio &&
                  hyps == 8 && fixed_ok;
  return {ok, fmtd("correct %.1f%%", 100.0 * a.association_accuracy) + " of " + std::to_string(a.succeeded) +
                  " detected trials (" + std::to_string(a.failed) + " detection failures, " +
                  fmtd("%.1f%% of all trials)", 100.0 * all_rate) + "; fixed scene " + std::to_string(hyps) +
                  " hypotheses, " + fmtd("min %.2f", lo) + fmtd(" max %.2f", hi) + fmtd(" ratio %.0f", ratio)};
}

Outcome tracking(int threads) {
  auto cfg = default_config(Mode::Track);
  cfg.trials = kTrackSeeds;
  cfg.threads = threads;
  const auto s = run_track(cfg).track_summary;
  const bool ok = s.succeeded == s.runs && s.median_ekf_circular < kEkfOverKfCircular * s.median_kf_circular &&
                  s.median_kf_linear < s.median_meas_linear && s.median_ekf_linear < s.median_meas_linear &&
                  s.median_kf_linear <= kKfOverEkfLinear * s.median_ekf_linear;
  return {ok, std::to_string(s.succeeded) + "/" + std::to_string(s.runs) + " seeds; circular EKF " +
                  fmtd("%.2f", s.median_ekf_circular) + " vs KF " + fmtd("%.2f", s.median_kf_circular) +
                  "; linear meas " + fmtd("%.2f", s.median_meas_linear) + ", KF " + fmtd("%.2f", s.median_kf_linear) +
                  ", EKF " + fmtd("%.2f", s.median_ekf_linear)};
}

Outcome properties() {
  std::mt19937_64 rng(8);
  std::vector<std::string> failed;

  {  // Trilateration Jacobian.
    std::uniform_real_distribution<double> u(-300.0, 800.0), b(-100.0, 100.0);
    double worst = 0.0;
    for (const auto& sc : {four_receiver_scene(), tetrahedron_scene()})
      for (int bias = 0; bias < 2; ++bias)
        for (int i = 0; i < 50; ++i) {
          const int d = sc.dims();
          Vector x(d + bias), p(d);
          for (int j = 0; j < d; ++j) x(j) = u(rng), p(j) = u(rng);
          if (bias) x(d) = b(rng);
          BistaticMeasurementSet m;
          m.transmitter_pos = sc.transmitter_pos;
          m.receiver_positions = sc.receivers;
          for (const auto& r : sc.receivers) m.ranges_m.push_back(bistatic_range(p, sc.transmitter_pos, r));
          const Eigen::MatrixXd j = trilateration_jacobian(x, m, bias);
          for (int c = 0; c < x.size(); ++c) {
            Vector xp = x, xm = x;
            xp(c) += 1e-4;
            xm(c) -= 1e-4;
            const Vector fd = (trilateration_residuals(xp, m, bias) - trilateration_residuals(xm, m, bias)) / 2e-4;
            worst = std::max(worst, (fd - j.col(c)).norm() / std::max(1.0, j.col(c).norm()));
          }
        }
    if (worst > kTrilatJacRel) failed.push_back("LM Jacobian " + fmtd("%.1e", worst));
  }
  {  // EKF Jacobians.
    std::uniform_real_distribution<double> pos(-500, 500), spd(0.5, 40), ang(-kPi, kPi);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Vector4 x(pos(rng), pos(rng), spd(rng), ang(rng));
      const Matrix4 fj = ekf_f_jacobian(x, 1.0), hj = ekf_h_jacobian(x);
      for (int c = 0; c < 4; ++c) {
        Vector4 xp = x, xm = x;
        xp(c) += 1e-6;
        xm(c) -= 1e-6;
        const Vector4 df = (ekf_f(xp, 1.0) - ekf_f(xm, 1.0)) / 2e-6;
        const Vector4 dh = (ekf_h(xp) - ekf_h(xm)) / 2e-6;
        worst = std::max(worst, (df - fj.col(c)).norm() / std::max(1.0, fj.col(c).norm()));
        worst = std::max(worst, (dh - hj.col(c)).norm() / std::max(1.0, hj.col(c).norm()));
      }
    }
    if (worst > kEkfJacRel) failed.push_back("EKF Jacobian " + fmtd("%.1e", worst));
  }
  {  // Covariance PSD at every step, both filters, noisy inputs from R.
    const NoiseModel noise;
    const Matrix4 chol = noise.R.llt().matrixL();
    std::normal_distribution<double> n01(0.0, 1.0);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10; ++i) {
      MotionProfile prof;
      prof.kind = i % 2 ? MotionKind::Circular : MotionKind::Linear;
      const auto truth = generate_motion(prof, static_cast<std::uint64_t>(100 + i));
      std::vector<Vector4> z;
      for (const auto& s : truth) {
        const Vector4 w(n01(rng), n01(rng), n01(rng), n01(rng));
        z.push_back(Vector4(s.pos(0), s.pos(1), s.vel(0), s.vel(1)) + chol * w);
      }
      for (auto f : {FilterKind::Kf, FilterKind::Ekf})
        worst = std::min(worst, track_sequence(z, f, noise, truth).min_cov_eigenvalue);
    }
    if (!(worst >= -1e-9)) failed.push_back("covariance eigenvalue " + fmtd("%.2e", worst));
  }
  {  // Parabolic refinement.
    bool ok = parabolic_refine(1, 2, 1) == 0.0 && std::abs(parabolic_refine(1, 3, 2) - 1.0 / 6.0) < 1e-12 &&
              std::abs(parabolic_refine(2, 3, 1) + 1.0 / 6.0) < 1e-12;
    std::uniform_real_distribution<double> u(-0.5, 0.5), a(0.1, 10.0);
    for (int i = 0; i < 500 && ok; ++i) {
      const double x0 = u(rng), c = a(rng), h = a(rng) + 20.0;
      auto f = [&](double x) { return h - c * (x - x0) * (x - x0); };
      ok = std::abs(parabolic_refine(f(-1), f(0), f(1)) - x0) < 1e-9;
      const double lo = a(rng), hi = a(rng), mid = std::max(lo, hi) + a(rng);
      const double off = parabolic_refine(lo, mid, hi);
      ok = ok && std::abs(off) <= 0.5 && std::abs(parabolic_refine(hi, mid, lo) + off) < 1e-12;
    }
    if (!ok) failed.push_back("parabolic refine");
  }
  {  // Cyclic prefix equality on random seeds of both CP layouts.
    std::uniform_int_distribution<std::uint32_t> seed(1, 4095);
    bool ok = true;
    for (int i = 0; i < 6 && ok; ++i) {
      WaveformConfig wc = i % 2 ? WaveformConfig::uniform_cp() : WaveformConfig{};
      wc.num_symbols = 16;
      wc.gold_seed_a = seed(rng);
      wc.gold_seed_b = seed(rng);
      const auto fr = generate_frame(wc);
      for (std::size_t s = 0; s < fr.symbol_boundaries.size() && ok; ++s) {
        const std::size_t b = fr.symbol_boundaries[s];
        const int cp = fr.cp_lengths[s];
        for (int j = 0; j < cp; ++j)
          ok = ok && fr.samples[b + j] == fr.samples[b + static_cast<std::size_t>(wc.fft_len) + j];
      }
    }
    if (!ok) failed.push_back("CP equality");
  }
  {  // Gold balance. The configured 4095-chip sequence is within one chip of
    // balanced; every member of the 3-stage preferred-pair family has
    // sum((-1)^g) in {-1, -5, 3}.
    const WaveformConfig wc;
    const auto g0 = generate_gold_sequence(wc.gold, 4095, wc.gold_seed_a, wc.gold_seed_b);
    const long ones0 = std::count(g0.begin(), g0.end(), 1);
    bool ok = std::abs(2 * ones0 - 4095) <= 1;
    const auto p3 = GoldPolynomials::standard(3);
    for (std::uint32_t sa = 1; sa < 8 && ok; ++sa)
      for (std::uint32_t sb = 1; sb < 8 && ok; ++sb) {
        const auto g = generate_gold_sequence(p3, 7, sa, sb);
        const long bal = 7 - 2 * std::count(g.begin(), g.end(), 1);
        ok = bal == -1 || bal == -5 || bal == 3;
      }
    if (!ok) failed.push_back("Gold balance");
  }
  std::string detail = "LM/EKF Jacobians, covariance PSD, parabolic refine, CP equality, Gold balance";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f + ";";
  }
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiscout acceptance suite"};
  std::vector<int> only;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--only", only, "Run only these criteria (1-8)")->check(CLI::Range(1, 8));
  app.add_option("--threads", threads, "Worker threads for the Monte-Carlo runs")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"geometry", geometry},
      {"CAF fidelity", caf_fidelity},
      {"single-target Monte-Carlo", [&] { return single_mc(threads); }},
      {"clock bias", [&] { return clock_bias(threads); }},
      {"3D", [&] { return three_d(threads); }},
      {"association", [&] { return association(threads); }},
      {"tracking ordering", [&] { return tracking(threads); }},
      {"numerical properties", properties},
  };
  const std::set<int> pick(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first,
                out.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !out.pass;
  }
  return failures == 0 ? 0 : 1;
}
