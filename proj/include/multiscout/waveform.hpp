#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "multiscout/common.hpp"

namespace multiscout {

// Feedback polynomials of the two maximal-length registers whose XOR forms a
// Gold sequence. Taps list the nonzero exponents of x^n + ... + 1 excluding
// the constant term, e.g. {12, 6, 4, 1} is x^12 + x^6 + x^4 + x + 1.
struct GoldPolynomials {
  int register_len = 12;
  std::vector<int> taps_a{12, 6, 4, 1};
  std::vector<int> taps_b{12, 7, 4, 3};

  // Known pairs for 3 (a preferred pair) and 12 stages.
  static GoldPolynomials standard(int register_len);
  void validate() const;
};

struct WaveformConfig {
  double carrier_freq_hz = 2.5e9;
  double subcarrier_spacing_hz = 15e3;
  int fft_len = 1024;
  int cp_first_len = 80;   // first symbol of each slot
  int cp_rest_len = 72;
  int symbols_per_slot = 14;
  int num_symbols = 128;
  // Null tones per band edge. The Nyquist bin is always null so that active
  // tones sit symmetrically at +-1..+-(N/2 - guard_tones - 1).
  int guard_tones = 35;
  bool dc_null = true;
  GoldPolynomials gold{};
  std::uint32_t gold_seed_a = 1;
  std::uint32_t gold_seed_b = 8;

  double sample_rate_hz() const { return fft_len * subcarrier_spacing_hz; }
  double sample_period_s() const { return 1.0 / sample_rate_hz(); }
  double wavelength_m() const { return kSpeedOfLight / carrier_freq_hz; }
  int active_tones() const;
  // FFT bin indices (0..N-1) carrying chips, ordered from the most negative
  // frequency to the most positive.
  std::vector<int> active_bins() const;
  int cp_len(int symbol_index) const;
  std::size_t frame_length() const;
  void validate() const;

  // Uniform N/16 cyclic prefix variant.
  static WaveformConfig uniform_cp();
};

struct BasebandFrame {
  ComplexVector samples;
  double sample_rate_hz = 0.0;
  double carrier_freq_hz = 0.0;
  std::vector<std::size_t> symbol_boundaries;  // start of each symbol's CP
  std::vector<int> cp_lengths;
  int fft_len = 0;

  std::size_t size() const { return samples.size(); }
};

std::vector<std::uint8_t> generate_m_sequence(int register_len, std::span<const int> taps,
                                              std::uint32_t seed, std::size_t length);

// XOR of two m-sequences, trimmed to `length` <= 2^register_len - 1.
std::vector<std::uint8_t> generate_gold_sequence(const GoldPolynomials& polys, std::size_t length,
                                                 std::uint32_t seed_a, std::uint32_t seed_b);

// BPSK-maps chips (0 -> +1, 1 -> -1) onto the active tones of every symbol.
// Symbol s reads active_tones() chips starting at s * active_tones(), wrapping
// cyclically over `chips`.
std::vector<ComplexVector> build_prs_symbols(const WaveformConfig& cfg,
                                             std::span<const std::uint8_t> chips);

// Unitary IDFT per symbol, CP prepended, symbols concatenated. No power
// normalization is applied here.
BasebandFrame ofdm_modulate(std::span<const ComplexVector> grids, const WaveformConfig& cfg);

double mean_power(std::span<const Complex> samples);

// Scales to the requested mean power; an all-zero frame is left untouched.
void normalize_power(BasebandFrame& frame, double target_power = 1.0);

// Full chain: Gold chips -> PRS grids -> OFDM -> unit mean power.
BasebandFrame generate_frame(const WaveformConfig& cfg);

}  // namespace multiscout
