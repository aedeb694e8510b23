#pragma once

#include <cstdint>
#include <vector>

#include "multiscout/common.hpp"
#include "multiscout/waveform.hpp"

namespace multiscout {

struct TargetState {
  Vector pos;
  Vector vel;
  double rcs_m2 = 4.0;
};

struct Scene {
  Vector transmitter_pos;
  std::vector<Vector> receivers;
  std::vector<TargetState> targets;
  double clock_bias_s = 0.0;  // common to every receiver

  int dims() const { return static_cast<int>(transmitter_pos.size()); }
  // Dimensional consistency and target sanity. Geometry rank is checked by
  // the solver, which knows how many unknowns it needs.
  void validate() const;
};

struct LinkBudget {
  double tx_power_dbm = 40.0;
  double tx_gain_dbi = 10.0;
  double rx_gain_dbi = 10.0;
  double noise_var = 1e-3;
};

// How |alpha_m| is chosen. Unit keeps every echo at the transmit frame's
// scale; RadarEquation uses the absolute bistatic radar equation.
enum class AmplitudeModel { Unit, RadarEquation };

struct SynthesisOptions {
  std::uint64_t seed = 0;  // drives the echo phases and the noise
  bool include_direct_path = false;
  bool add_noise = true;
  AmplitudeModel amplitude = AmplitudeModel::Unit;
  // Direct-path amplitude relative to a unit echo (Unit model only).
  double direct_path_gain_db = 30.0;
};

struct ReceiverCapture {
  ComplexVector samples;
  int receiver_index = 0;
  double sample_rate_hz = 0.0;
};

double bistatic_range(const Vector& p, const Vector& t, const Vector& r);

// u_t + u_r at p. Throws when p coincides with t or r.
Vector bistatic_direction(const Vector& p, const Vector& t, const Vector& r);

double bistatic_radial_velocity(const Vector& p, const Vector& v, const Vector& t, const Vector& r);

// Echo amplitude sqrt(P_T G_T G_R lambda^2 sigma / ((4 pi)^3 d_t^2 d_r^2)) with
// P_T in watts.
double path_gain(const LinkBudget& budget, const Vector& p, const Vector& t, const Vector& r,
                 double rcs_m2, double wavelength_m);

// Free-space direct-path amplitude sqrt(P_T G_T G_R lambda^2 / ((4 pi)^2 d^2)).
double direct_path_gain(const LinkBudget& budget, const Vector& t, const Vector& r,
                        double wavelength_m);

// Integer sample delay of an echo: round(B/c * fs) + round(bias * fs).
long echo_delay_samples(double bistatic_range_m, double clock_bias_s, double sample_rate_hz);

// Uniform [0, 2pi) phase of the echo of `target` at `receiver`.
double echo_phase(std::uint64_t seed, int receiver, int target);

// Noiseless contribution of one target at one receiver.
ComplexVector synthesize_echo(const BasebandFrame& frame, const Scene& scene, int receiver,
                              int target, const LinkBudget& budget, const SynthesisOptions& options);

// Sum of all target echoes, the optional direct path, then white noise.
ReceiverCapture synthesize_capture(const BasebandFrame& frame, const Scene& scene, int receiver,
                                   const LinkBudget& budget, const SynthesisOptions& options);

struct DirectPathOptions {
  int search_lags = 128;       // correlation window [0, search_lags)
  int min_lag = 0;             // peak search restricted to [min_lag, max_lag]
  int max_lag = -1;            // -1: end of window
  double threshold_ratio = 10.0;  // peak must exceed this multiple of the median
};

struct DirectPathRemoval {
  ReceiverCapture capture;
  bool removed = false;
  int lag = 0;
  Complex gain{};
  double peak_to_median = 0.0;
};

// Zero-Doppler matched filter against the frame, then subtraction of the
// scaled, shifted replica at the strongest lag if it clears the threshold.
DirectPathRemoval remove_direct_path(const ReceiverCapture& capture, const BasebandFrame& frame,
                                     const DirectPathOptions& options = {});

}  // namespace multiscout
