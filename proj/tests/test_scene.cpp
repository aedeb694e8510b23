#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "multiscout/rangedoppler.hpp"
#include "multiscout/rng.hpp"
#include "test_util.hpp"

using namespace multiscout;
using testutil::v2;
using testutil::v3;

namespace {

Vector polar_velocity(double speed, double deg) {
  return v2(speed * std::cos(deg2rad(deg)), speed * std::sin(deg2rad(deg)));
}

double energy(const ComplexVector& x) {
  double e = 0.0;
  for (auto c : x) e += std::norm(c);
  return e;
}

SynthesisOptions noiseless(std::uint64_t seed = 11) {
  SynthesisOptions o;
  o.seed = seed;
  o.add_noise = false;
  return o;
}

}  // namespace

TEST_CASE("bistatic range on the reference scenes") {
  const Vector t = v2(250.0, 433.0 / 3.0);
  const Vector p = v2(67.18, 423.72);
  CHECK(std::abs(bistatic_range(p, t, v2(0, 0)) - 762.89) < 0.05);
  CHECK(std::abs(bistatic_range(p, t, v2(500, 0)) - 939.58) < 0.05);
  CHECK(std::abs(bistatic_range(p, t, v2(250, 433)) - 516.94) < 0.05);
  CHECK(std::abs(bistatic_range(v3(67.18, 423.72, 381.89), v3(125, 125, 125), v3(0, 0, 0)) - 972.56) < 0.05);
  const Vector r = v2(500, 0);
  CHECK(bistatic_range(r, t, r) == doctest::Approx((r - t).norm()));
}

TEST_CASE("bistatic radial velocity on the reference scene") {
  const Vector t = v2(250.0, 433.0 / 3.0);
  const Vector p = v2(67.18, 423.72);
  const Vector v = polar_velocity(24.17, -100.68);
  CHECK(std::abs(bistatic_radial_velocity(p, v, t, v2(0, 0)) - (-41.58)) < 0.05);
  CHECK(std::abs(bistatic_radial_velocity(p, v, t, v2(500, 0)) - (-30.83)) < 0.05);
  CHECK(std::abs(bistatic_radial_velocity(p, v, t, v2(250, 433)) - (-11.74)) < 0.05);
  CHECK(bistatic_radial_velocity(p, v2(0, 0), t, v2(0, 0)) == 0.0);
  const Vector dir = bistatic_direction(p, t, v2(0, 0));
  const Vector perp = v2(-dir(1), dir(0));
  CHECK(std::abs(bistatic_radial_velocity(p, perp, t, v2(0, 0))) < 1e-12);
  CHECK_THROWS(bistatic_radial_velocity(t, v, t, v2(0, 0)));
  CHECK_THROWS(bistatic_direction(v2(0, 0), t, v2(0, 0)));
}

TEST_CASE("bistatic geometry agrees with a component-wise re-implementation") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = trial % 2 ? 3 : 2;
    Vector p(d), t(d), r(d), v(d);
    for (int i = 0; i < d; ++i) {
      p(i) = u(rng);
      t(i) = u(rng);
      r(i) = u(rng);
      v(i) = u(rng) / 20.0;
    }
    double dt2 = 0, dr2 = 0;
    for (int i = 0; i < d; ++i) {
      dt2 += (p(i) - t(i)) * (p(i) - t(i));
      dr2 += (p(i) - r(i)) * (p(i) - r(i));
    }
    const double dt = std::sqrt(dt2), dr = std::sqrt(dr2);
    double vr = 0;
    for (int i = 0; i < d; ++i) vr += v(i) * ((p(i) - t(i)) / dt + (p(i) - r(i)) / dr);
    CHECK(testutil::rel_diff(bistatic_range(p, t, r), dt + dr) < 1e-9);
    CHECK(std::abs(bistatic_radial_velocity(p, v, t, r) - vr) <= 1e-9 * std::max(1.0, std::abs(vr)));
  }
}

TEST_CASE("path gain follows the bistatic radar equation") {
  LinkBudget b{30.0, 0.0, 0.0, 1e-3};  // 30 dBm = 1 W, 0 dBi
  const Vector p = v2(0, 0);
  const Vector t = v2(500, 0);
  const Vector r = v2(0, 500);
  const double lambda = 0.12, sigma = 4.0;
  const double four_pi_cubed = std::pow(4.0 * kPi, 3);
  const double expect = std::sqrt(1.0 * lambda * lambda * sigma / (four_pi_cubed * 500.0 * 500.0 * 500.0 * 500.0));
  CHECK(path_gain(b, p, t, r, sigma, lambda) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(path_gain(b, p, v2(1000, 0), r, sigma, lambda) == doctest::Approx(expect / 2.0).epsilon(1e-12));
  CHECK_THROWS(path_gain(b, p, p, r, sigma, lambda));
}

TEST_CASE("direct path gain is the free-space amplitude") {
  LinkBudget b{30.0, 0.0, 0.0, 1e-3};
  const double lambda = 0.12;
  const double expect = lambda / (4.0 * kPi * 500.0);
  CHECK(direct_path_gain(b, v2(0, 0), v2(500, 0), lambda) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("echo delay rounds range and bias separately") {
  const double fs = 15.36e6;
  CHECK(echo_delay_samples(0.0, 0.0, fs) == 0);
  const double bin = kSpeedOfLight / fs;
  CHECK(echo_delay_samples(10.4 * bin, 0.0, fs) == 10);
  CHECK(echo_delay_samples(10.6 * bin, 0.0, fs) == 11);
  CHECK(echo_delay_samples(10.4 * bin, 200e-9, fs) == 10 + std::lround(200e-9 * fs));
}

TEST_CASE("noiseless static echo is the frame delayed and phase rotated") {
  const auto frame = generate_frame(testutil::short_waveform(4));
  Scene s = testutil::triangle();
  s.targets = {{v2(200, 300), v2(0, 0), 4.0}};
  const auto opts = noiseless();
  const auto cap = synthesize_capture(frame, s, 1, LinkBudget{}, opts);
  const long delay = echo_delay_samples(bistatic_range(s.targets[0].pos, s.transmitter_pos, s.receivers[1]), 0.0,
                                        frame.sample_rate_hz);
  const Complex a = std::polar(1.0, echo_phase(opts.seed, 1, 0));
  for (long n = 0; n < static_cast<long>(frame.size()); ++n) {
    const Complex expect = n < delay ? Complex{} : a * frame.samples[static_cast<std::size_t>(n - delay)];
    REQUIRE(std::abs(cap.samples[static_cast<std::size_t>(n)] - expect) < 1e-12);
  }
  CHECK(cap.receiver_index == 1);
  CHECK(cap.sample_rate_hz == frame.sample_rate_hz);
}

TEST_CASE("moving echo carries the Doppler shift v f_c / c") {
  const auto frame = generate_frame(testutil::short_waveform(14));
  Scene s = testutil::triangle();
  const Vector p = v2(300, 300);
  // Velocity along the bistatic direction so that v_r = 10 m/s.
  const Vector dir = bistatic_direction(p, s.transmitter_pos, s.receivers[0]);
  s.targets = {{p, dir * (10.0 / dir.squaredNorm()), 4.0}};
  CHECK(bistatic_radial_velocity(p, s.targets[0].vel, s.transmitter_pos, s.receivers[0]) == doctest::Approx(10.0));
  const auto cap = synthesize_capture(frame, s, 0, LinkBudget{}, noiseless());
  const long delay = echo_delay_samples(bistatic_range(p, s.transmitter_pos, s.receivers[0]), 0.0, frame.sample_rate_hz);

  // Brute-force search of the matched-filter magnitude over a 0.5 Hz grid.
  double best_f = 0.0, best = -1.0;
  for (double f = 0.0; f <= 200.0; f += 0.5) {
    Complex acc{};
    const double w = 2.0 * kPi * f / frame.sample_rate_hz;
    for (long n = delay; n < static_cast<long>(frame.size()); ++n)
      acc += cap.samples[static_cast<std::size_t>(n)] * std::conj(frame.samples[static_cast<std::size_t>(n - delay)]) *
             std::polar(1.0, -w * static_cast<double>(n));
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      best_f = f;
    }
  }
  const double expect = 10.0 * frame.carrier_freq_hz / kSpeedOfLight;
  CHECK(expect == doctest::Approx(83.39).epsilon(1e-3));
  CHECK(std::abs(best_f - expect) <= 0.25);
}

TEST_CASE("superposition and determinism of captures") {
  const auto frame = generate_frame(testutil::short_waveform(4));
  Scene s = testutil::triangle();
  s.targets = {{v2(100, 200), v2(3, -4), 4.0}, {v2(400, 350), v2(-10, 2), 4.0}};
  const auto opts = noiseless(5);
  const auto both = synthesize_capture(frame, s, 2, LinkBudget{}, opts);
  const auto e0 = synthesize_echo(frame, s, 2, 0, LinkBudget{}, opts);
  const auto e1 = synthesize_echo(frame, s, 2, 1, LinkBudget{}, opts);
  for (std::size_t n = 0; n < both.samples.size(); ++n) REQUIRE(both.samples[n] == e0[n] + e1[n]);

  SynthesisOptions noisy = opts;
  noisy.add_noise = true;
  const auto a = synthesize_capture(frame, s, 2, LinkBudget{}, noisy);
  const auto b = synthesize_capture(frame, s, 2, LinkBudget{}, noisy);
  CHECK(a.samples == b.samples);
  noisy.seed = 6;
  CHECK(synthesize_capture(frame, s, 2, LinkBudget{}, noisy).samples != a.samples);
}

TEST_CASE("noise has the configured variance") {
  const auto frame = generate_frame(testutil::short_waveform(14));
  Scene s = testutil::triangle();
  SynthesisOptions o;
  o.seed = 3;
  LinkBudget b;
  const auto cap = synthesize_capture(frame, s, 0, b, o);
  const double var = energy(cap.samples) / static_cast<double>(cap.samples.size());
  CHECK(var == doctest::Approx(b.noise_var).epsilon(0.03));
}

TEST_CASE("echoes beyond the frame are rejected") {
  const auto frame = generate_frame(testutil::short_waveform(1));
  Scene s = testutil::triangle();
  s.targets = {{v2(30000, 0), v2(0, 0), 4.0}};
  CHECK_THROWS_AS(synthesize_capture(frame, s, 0, LinkBudget{}, noiseless()), std::invalid_argument);
}

TEST_CASE("scene validation") {
  Scene s = testutil::triangle();
  s.targets = {{v3(1, 2, 3), v3(0, 0, 0), 4.0}};
  CHECK_THROWS(s.validate());
  s.targets = {{v2(1, 2), v2(0, 0), -1.0}};
  CHECK_THROWS(s.validate());
}

TEST_CASE("direct path removal cancels an on-grid replica") {
  const auto frame = generate_frame(testutil::short_waveform(4));
  ReceiverCapture cap;
  cap.sample_rate_hz = frame.sample_rate_hz;
  cap.samples.assign(frame.size(), Complex{});
  for (std::size_t n = 10; n < frame.size(); ++n) cap.samples[n] = 0.5 * frame.samples[n - 10];
  const auto out = remove_direct_path(cap, frame);
  CHECK(out.removed);
  CHECK(out.lag == 10);
  CHECK(std::abs(out.gain - Complex{0.5, 0.0}) < 1e-9);
  CHECK(energy(out.capture.samples) <= 1e-4 * energy(cap.samples));
}

TEST_CASE("direct path removal is a no-op without a direct path") {
  const auto frame = generate_frame(testutil::short_waveform(4));
  Scene s = testutil::triangle();
  SynthesisOptions o;
  o.seed = 8;
  const auto cap = synthesize_capture(frame, s, 0, LinkBudget{}, o);
  const auto out = remove_direct_path(cap, frame);
  CHECK_FALSE(out.removed);
  CHECK(out.capture.samples == cap.samples);
}

TEST_CASE("direct path removal keeps a 30 dB weaker echo in place") {
  const auto frame = generate_frame(testutil::short_waveform(8));
  Scene s = testutil::triangle();
  s.targets = {{v2(150, 380), v2(5, -8), 4.0}};
  SynthesisOptions o = noiseless(21);
  o.include_direct_path = true;
  o.direct_path_gain_db = 30.0;
  const auto cap = synthesize_capture(frame, s, 0, LinkBudget{}, o);
  const auto cleaned = remove_direct_path(cap, frame);
  CHECK(cleaned.removed);

  SynthesisOptions echo_only = noiseless(21);
  const auto ref = synthesize_capture(frame, s, 0, LinkBudget{}, echo_only);
  const int d = 64;
  const DopplerGrid grid{400.0, 41};
  const auto a = coarse_peak(compute_caf(cleaned.capture, frame, d, grid));
  const auto b = coarse_peak(compute_caf(ref, frame, d, grid));
  CHECK(a.delay_bin == b.delay_bin);
  CHECK(a.doppler_index == b.doppler_index);
}

TEST_CASE("radar-equation echo level at the default link budget") {
  // Peak CAF power against the noise floor at about 1.2 km bistatic range.
  const auto frame = generate_frame(WaveformConfig{});
  Scene s = testutil::triangle();
  s.targets = {{v2(-300, -300), v2(0, 0), 4.0}};
  const double range = bistatic_range(s.targets[0].pos, s.transmitter_pos, s.receivers[0]);
  CHECK(range > 1000.0);
  SynthesisOptions o;
  o.seed = 4;
  o.amplitude = AmplitudeModel::RadarEquation;
  const auto cap = synthesize_capture(frame, s, 0, LinkBudget{}, o);
  const auto map = compute_caf(cap, frame, delay_bins_for_range(range, frame.sample_rate_hz), DopplerGrid{400.0, 41});
  const auto peak = coarse_peak(map);
  const double expect_bin = range / map.delay_bin_m;
  // The echo is tens of dB below the noise: report the measured SNR and only
  // require the CAF to stay finite. See the amplitude notes in the README.
  const double floor = map.caf.cwiseAbs2().mean();
  const double snr_db = 10.0 * std::log10(std::norm(map.caf(std::lround(expect_bin), map.doppler_grid.zero_index())) / floor);
  MESSAGE("radar-equation echo CAF SNR at " << range << " m: " << snr_db << " dB (peak bin " << peak.delay_bin
                                            << ", expected " << expect_bin << ")");
  CHECK(std::isfinite(snr_db));

  // The unit-amplitude model used by default detects the same echo.
  o.amplitude = AmplitudeModel::Unit;
  const auto unit = coarse_peak(compute_caf(synthesize_capture(frame, s, 0, LinkBudget{}, o), frame, map.delay_bins(),
                                            DopplerGrid{400.0, 41}));
  CHECK(unit.delay_bin == std::lround(expect_bin));
}
