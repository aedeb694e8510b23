#include "multiscout/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "multiscout/rng.hpp"

namespace multiscout {
namespace {

constexpr double kFourPi = 4.0 * kPi;

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

void check_same_dims(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

// Adds amplitude * x[n - delay] * exp(j 2 pi f_d n Ts) into out.
void add_delayed_replica(const BasebandFrame& frame, long delay, double doppler_hz,
                         Complex amplitude, ComplexVector& out) {
  const long n_total = static_cast<long>(frame.size());
  if (delay < 0 || delay >= n_total)
    throw std::invalid_argument("synthesize: delay of " + std::to_string(delay) +
                                " samples is outside the frame (target out of unambiguous range)");
  const double w = 2.0 * kPi * doppler_hz / frame.sample_rate_hz;
  for (long n = delay; n < n_total; ++n) {
    const auto idx = static_cast<std::size_t>(n);
    out[idx] += amplitude * frame.samples[static_cast<std::size_t>(n - delay)] *
                std::polar(1.0, w * static_cast<double>(n));
  }
}

}  // namespace

void Scene::validate() const {
  const auto d = transmitter_pos.size();
  if (d != 2 && d != 3) throw std::invalid_argument("Scene: dims must be 2 or 3");
  for (const auto& r : receivers)
    if (r.size() != d) throw std::invalid_argument("Scene: receiver dimension mismatch");
  for (const auto& tg : targets) {
    if (tg.pos.size() != d || tg.vel.size() != d)
      throw std::invalid_argument("Scene: target dimension mismatch");
    if (!(tg.rcs_m2 > 0.0)) throw std::invalid_argument("Scene: rcs_m2 must be positive");
    if (!tg.vel.allFinite() || !tg.pos.allFinite())
      throw std::invalid_argument("Scene: target state must be finite");
  }
}

double bistatic_range(const Vector& p, const Vector& t, const Vector& r) {
  check_same_dims(p, t, "bistatic_range");
  check_same_dims(p, r, "bistatic_range");
  return (p - t).norm() + (p - r).norm();
}

Vector bistatic_direction(const Vector& p, const Vector& t, const Vector& r) {
  check_same_dims(p, t, "bistatic_direction");
  check_same_dims(p, r, "bistatic_direction");
  const double dt = (p - t).norm();
  const double dr = (p - r).norm();
  if (dt == 0.0 || dr == 0.0)
    throw std::invalid_argument("bistatic_direction: target coincides with transmitter or receiver");
  return (p - t) / dt + (p - r) / dr;
}

double bistatic_radial_velocity(const Vector& p, const Vector& v, const Vector& t, const Vector& r) {
  check_same_dims(p, v, "bistatic_radial_velocity");
  return v.dot(bistatic_direction(p, t, r));
}

double path_gain(const LinkBudget& budget, const Vector& p, const Vector& t, const Vector& r,
                 double rcs_m2, double wavelength_m) {
  const double dt = (p - t).norm();
  const double dr = (p - r).norm();
  if (dt == 0.0 || dr == 0.0) throw std::invalid_argument("path_gain: zero propagation distance");
  const double power = dbm_to_watts(budget.tx_power_dbm) * db_to_linear(budget.tx_gain_dbi) *
                       db_to_linear(budget.rx_gain_dbi) * wavelength_m * wavelength_m * rcs_m2 /
                       (kFourPi * kFourPi * kFourPi * dt * dt * dr * dr);
  return std::sqrt(power);
}

double direct_path_gain(const LinkBudget& budget, const Vector& t, const Vector& r,
                        double wavelength_m) {
  const double d = (t - r).norm();
  if (d == 0.0) throw std::invalid_argument("direct_path_gain: zero propagation distance");
  const double power = dbm_to_watts(budget.tx_power_dbm) * db_to_linear(budget.tx_gain_dbi) *
                       db_to_linear(budget.rx_gain_dbi) * wavelength_m * wavelength_m /
                       (kFourPi * kFourPi * d * d);
  return std::sqrt(power);
}

long echo_delay_samples(double bistatic_range_m, double clock_bias_s, double sample_rate_hz) {
  return std::lround(bistatic_range_m / kSpeedOfLight * sample_rate_hz) +
         std::lround(clock_bias_s * sample_rate_hz);
}

double echo_phase(std::uint64_t seed, int receiver, int target) {
  Rng rng(derive_seed(derive_seed(seed, SeedStream::Phase, static_cast<std::uint64_t>(receiver)),
                      static_cast<std::uint64_t>(target)));
  return std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
}

ComplexVector synthesize_echo(const BasebandFrame& frame, const Scene& scene, int receiver,
                              int target, const LinkBudget& budget, const SynthesisOptions& options) {
  scene.validate();
  if (receiver < 0 || receiver >= static_cast<int>(scene.receivers.size()))
    throw std::out_of_range("synthesize_echo: receiver index out of range");
  if (target < 0 || target >= static_cast<int>(scene.targets.size()))
    throw std::out_of_range("synthesize_echo: target index out of range");
  const auto& tg = scene.targets[static_cast<std::size_t>(target)];
  const auto& r = scene.receivers[static_cast<std::size_t>(receiver)];
  const auto& t = scene.transmitter_pos;

  const double range = bistatic_range(tg.pos, t, r);
  const double radial_velocity = bistatic_radial_velocity(tg.pos, tg.vel, t, r);
  const long delay = echo_delay_samples(range, scene.clock_bias_s, frame.sample_rate_hz);
  const double doppler = radial_velocity * frame.carrier_freq_hz / kSpeedOfLight;
  const double magnitude =
      options.amplitude == AmplitudeModel::Unit
          ? 1.0
          : path_gain(budget, tg.pos, t, r, tg.rcs_m2, kSpeedOfLight / frame.carrier_freq_hz);
  const Complex alpha = std::polar(magnitude, echo_phase(options.seed, receiver, target));

  ComplexVector out(frame.size());
  add_delayed_replica(frame, delay, doppler, alpha, out);
  return out;
}

ReceiverCapture synthesize_capture(const BasebandFrame& frame, const Scene& scene, int receiver,
                                   const LinkBudget& budget, const SynthesisOptions& options) {
  if (budget.noise_var < 0.0) throw std::invalid_argument("LinkBudget: noise_var must be >= 0");
  ReceiverCapture cap;
  cap.receiver_index = receiver;
  cap.sample_rate_hz = frame.sample_rate_hz;
  cap.samples.assign(frame.size(), Complex{});

  for (int k = 0; k < static_cast<int>(scene.targets.size()); ++k) {
    const auto echo = synthesize_echo(frame, scene, receiver, k, budget, options);
    for (std::size_t n = 0; n < echo.size(); ++n) cap.samples[n] += echo[n];
  }

  if (options.include_direct_path) {
    const auto& r = scene.receivers.at(static_cast<std::size_t>(receiver));
    const double baseline = (scene.transmitter_pos - r).norm();
    const long delay = echo_delay_samples(baseline, scene.clock_bias_s, frame.sample_rate_hz);
    const double magnitude =
        options.amplitude == AmplitudeModel::Unit
            ? std::pow(10.0, options.direct_path_gain_db / 20.0)
            : direct_path_gain(budget, scene.transmitter_pos, r,
                               kSpeedOfLight / frame.carrier_freq_hz);
    const auto direct_index = static_cast<int>(scene.targets.size()) + 1'000'000;
    add_delayed_replica(frame, delay, 0.0,
                        std::polar(magnitude, echo_phase(options.seed, receiver, direct_index)),
                        cap.samples);
  }

  if (options.add_noise && budget.noise_var > 0.0) {
    Rng rng(derive_seed(options.seed, SeedStream::Noise, static_cast<std::uint64_t>(receiver)));
    std::normal_distribution<double> gauss(0.0, std::sqrt(budget.noise_var / 2.0));
    for (auto& s : cap.samples) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      s += Complex{re, im};
    }
  }
  return cap;
}

DirectPathRemoval remove_direct_path(const ReceiverCapture& capture, const BasebandFrame& frame,
                                     const DirectPathOptions& options) {
  const auto& y = capture.samples;
  const auto& x = frame.samples;
  const auto n_total = static_cast<long>(std::min(x.size(), y.size()));
  const long window = std::min<long>(options.search_lags, n_total);
  const long lo = std::max<long>(0, options.min_lag);
  const long hi = options.max_lag < 0 ? window - 1 : std::min<long>(options.max_lag, window - 1);

  DirectPathRemoval result;
  result.capture = capture;
  if (window <= 0 || lo > hi) return result;

  std::vector<Complex> corr(static_cast<std::size_t>(window));
  std::vector<double> mags(corr.size());
  for (long lag = 0; lag < window; ++lag) {
    Complex acc{};
    for (long n = 0; n + lag < n_total; ++n)
      acc += y[static_cast<std::size_t>(n + lag)] * std::conj(x[static_cast<std::size_t>(n)]);
    corr[static_cast<std::size_t>(lag)] = acc;
    mags[static_cast<std::size_t>(lag)] = std::abs(acc);
  }

  long best = lo;
  for (long lag = lo; lag <= hi; ++lag)
    if (mags[static_cast<std::size_t>(lag)] > mags[static_cast<std::size_t>(best)]) best = lag;

  std::vector<double> sorted = mags;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double peak = mags[static_cast<std::size_t>(best)];
  result.peak_to_median = median > 0.0 ? peak / median : (peak > 0.0 ? INFINITY : 0.0);
  result.lag = static_cast<int>(best);
  if (!(result.peak_to_median > options.threshold_ratio)) return result;

  double energy = 0.0;
  for (long n = 0; n + best < n_total; ++n) energy += std::norm(x[static_cast<std::size_t>(n)]);
  if (energy <= 0.0) return result;
  result.gain = corr[static_cast<std::size_t>(best)] / energy;
  for (long n = best; n < n_total; ++n)
    result.capture.samples[static_cast<std::size_t>(n)] -=
        result.gain * x[static_cast<std::size_t>(n - best)];
  result.removed = true;
  return result;
}

}  // namespace multiscout
