#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "multiscout/fft.hpp"
#include "multiscout/iq_io.hpp"
#include "test_util.hpp"

using namespace multiscout;
using testutil::short_waveform;

namespace {

std::vector<int> bipolar(const std::vector<std::uint8_t>& bits) {
  std::vector<int> out;
  for (auto b : bits) out.push_back(b ? -1 : 1);
  return out;
}

int periodic_xcorr(const std::vector<int>& a, const std::vector<int>& b, std::size_t shift) {
  int acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[(i + shift) % b.size()];
  return acc;
}

}  // namespace

TEST_CASE("fft plan matches a direct DFT") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (std::size_t n : {1u, 7u, 16u, 60u}) {
    ComplexVector x(n), y(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    FftPlan fwd(n, FftPlan::Direction::Forward);
    fwd.execute(x, y);
    const auto ref = testutil::naive_dft(x, -1);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(y[k] - ref[k]) < 1e-9 * std::sqrt(double(n)));
    FftPlan inv(n, FftPlan::Direction::Backward);
    ComplexVector z(n);
    inv.execute(y, z);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(z[k] / double(n) - x[k]) < 1e-12);
  }
}

TEST_CASE("m-sequence has period 2^n-1, 2^(n-1) ones and two-valued autocorrelation") {
  const GoldPolynomials p;
  for (const auto& taps : {p.taps_a, p.taps_b}) {
    const auto seq = generate_m_sequence(12, taps, 1, 2 * 4095);
    CHECK(std::equal(seq.begin(), seq.begin() + 4095, seq.begin() + 4095));
    std::vector<std::uint8_t> one(seq.begin(), seq.begin() + 4095);
    CHECK(std::count(one.begin(), one.end(), 1) == 2048);
    const auto b = bipolar(one);
    for (std::size_t s : {1u, 2u, 17u, 1000u, 4094u}) CHECK(periodic_xcorr(b, b, s) == -1);
  }
}

TEST_CASE("gold sequence of length 4095 is balanced within one chip") {
  const WaveformConfig cfg;
  const auto g = generate_gold_sequence(cfg.gold, 4095, cfg.gold_seed_a, cfg.gold_seed_b);
  REQUIRE(g.size() == 4095);
  const long ones = std::count(g.begin(), g.end(), 1);
  CHECK(std::abs(ones - (4095 - ones)) <= 1);
}

TEST_CASE("gold: identical registers and seeds XOR to zero") {
  GoldPolynomials p;
  p.taps_b = p.taps_a;
  const auto g = generate_gold_sequence(p, 4095, 5, 5);
  CHECK(std::all_of(g.begin(), g.end(), [](auto b) { return b == 0; }));
}

TEST_CASE("gold: 3-stage preferred pair cross-correlation is three-valued") {
  const auto p = GoldPolynomials::standard(3);
  const auto a = bipolar(generate_m_sequence(3, p.taps_a, 1, 7));
  const auto b = bipolar(generate_m_sequence(3, p.taps_b, 1, 7));
  for (std::size_t s = 0; s < 7; ++s) {
    const int c = periodic_xcorr(a, b, s);
    CHECK((c == -1 || c == -5 || c == 3));
  }
  // Two family members: a XOR b and a XOR shifted b.
  const auto g1 = bipolar(generate_gold_sequence(p, 7, 1, 1));
  const auto g2 = bipolar(generate_gold_sequence(p, 7, 1, 3));
  for (std::size_t s = 0; s < 7; ++s) {
    const int c = periodic_xcorr(g1, g2, s);
    CHECK((c == -1 || c == -5 || c == 3));
  }
}

TEST_CASE("gold: invalid arguments") {
  const GoldPolynomials p;
  CHECK_THROWS(generate_gold_sequence(p, 4095, 0, 1));
  CHECK_THROWS(generate_gold_sequence(p, 4095, 1, 0));
  CHECK_THROWS(generate_gold_sequence(p, 4096, 1, 1));
}

TEST_CASE("prs symbols: tone count, nulls, symmetric placement and mapping") {
  const WaveformConfig cfg;
  CHECK(cfg.active_tones() == 952);
  // N - 2g - 2: DC and the Nyquist bin are both null.
  CHECK(cfg.active_tones() == cfg.fft_len - 2 * cfg.guard_tones - 2);
  const auto bins = cfg.active_bins();
  REQUIRE(static_cast<int>(bins.size()) == 952);
  std::vector<int> signed_bins;
  for (int b : bins) signed_bins.push_back(b < cfg.fft_len / 2 ? b : b - cfg.fft_len);
  for (int b : signed_bins) {
    CHECK(b != 0);
    CHECK(std::find(signed_bins.begin(), signed_bins.end(), -b) != signed_bins.end());
  }

  const std::vector<std::uint8_t> zeros(952, 0);
  const auto grids = build_prs_symbols(short_waveform(2), zeros);
  REQUIRE(grids.size() == 2);
  for (const auto& g : grids) {
    int nonzero = 0;
    for (int k = 0; k < cfg.fft_len; ++k) {
      const bool active = std::find(bins.begin(), bins.end(), k) != bins.end();
      if (active) CHECK(g[static_cast<std::size_t>(k)] == Complex{1.0, 0.0});
      else CHECK(g[static_cast<std::size_t>(k)] == Complex{});
      nonzero += g[static_cast<std::size_t>(k)] != Complex{};
    }
    CHECK(nonzero == 952);
  }
  std::vector<std::uint8_t> ones(952, 1);
  CHECK(build_prs_symbols(short_waveform(1), ones)[0][static_cast<std::size_t>(bins[0])] == Complex{-1.0, 0.0});
  CHECK_THROWS(build_prs_symbols(short_waveform(1), std::vector<std::uint8_t>(10, 0)));
}

TEST_CASE("ofdm: single tone is a sampled complex exponential with a cyclic prefix") {
  auto cfg = short_waveform(1);
  const int n = cfg.fft_len;
  const int k = 37;
  ComplexVector grid(static_cast<std::size_t>(n));
  grid[static_cast<std::size_t>(k)] = 1.0;
  const std::vector<ComplexVector> grids{grid};
  const auto frame = ofdm_modulate(grids, cfg);
  const int cp = cfg.cp_first_len;
  REQUIRE(frame.size() == static_cast<std::size_t>(n + cp));
  for (int i = 0; i < n; ++i) {
    const Complex expect = std::polar(1.0 / std::sqrt(double(n)), 2.0 * kPi * k * i / n);
    CHECK(std::abs(frame.samples[static_cast<std::size_t>(cp + i)] - expect) < 1e-12);
  }
  for (int i = 0; i < cp; ++i)
    CHECK(frame.samples[static_cast<std::size_t>(i)] == frame.samples[static_cast<std::size_t>(n + i)]);

  const std::vector<ComplexVector> zero{ComplexVector(static_cast<std::size_t>(n))};
  const auto z = ofdm_modulate(zero, cfg);
  CHECK(std::all_of(z.samples.begin(), z.samples.end(), [](Complex c) { return c == Complex{}; }));
  const std::vector<ComplexVector> bad{ComplexVector(10)};
  CHECK_THROWS(ofdm_modulate(bad, cfg));
}

TEST_CASE("frame length follows the per-slot cyclic prefix pattern") {
  const WaveformConfig cfg;
  const auto frame = generate_frame(cfg);
  // 128 symbols in 14-symbol slots: 10 slot-leading symbols.
  CHECK(frame.size() == 128u * 1024u + 10u * 80u + 118u * 72u);
  CHECK(frame.size() == cfg.frame_length());
  CHECK(frame.symbol_boundaries.size() == 128);
  CHECK(frame.cp_lengths[0] == 80);
  CHECK(frame.cp_lengths[1] == 72);
  CHECK(frame.cp_lengths[14] == 80);

  const auto uni = WaveformConfig::uniform_cp();
  CHECK(uni.cp_len(0) == 64);
  CHECK(uni.cp_len(5) == 64);
  CHECK(uni.frame_length() == 128u * (1024u + 64u));
}

TEST_CASE("every symbol satisfies the cyclic prefix equality") {
  for (const auto& cfg : {short_waveform(20), WaveformConfig::uniform_cp()}) {
    const auto frame = generate_frame(cfg);
    for (std::size_t s = 0; s < frame.symbol_boundaries.size(); ++s) {
      const std::size_t start = frame.symbol_boundaries[s];
      const auto cp = static_cast<std::size_t>(frame.cp_lengths[s]);
      const auto n = static_cast<std::size_t>(frame.fft_len);
      for (std::size_t i = 0; i < cp; ++i) REQUIRE(frame.samples[start + i] == frame.samples[start + n + i]);
    }
  }
}

TEST_CASE("frame power, finiteness and determinism") {
  const auto cfg = short_waveform(14);
  const auto a = generate_frame(cfg);
  const auto b = generate_frame(cfg);
  CHECK(a.samples == b.samples);
  CHECK(mean_power(a.samples) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::all_of(a.samples.begin(), a.samples.end(), [](Complex c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); }));
  auto other = cfg;
  other.gold_seed_b = 9;
  CHECK(generate_frame(other).samples != a.samples);
}

TEST_CASE("frame autocorrelation peaks at lag zero with sidelobes 5x lower") {
  const auto frame = generate_frame(short_waveform(14));
  const auto& x = frame.samples;
  const auto n = x.size();
  const auto len = next_fast_fft_size(2 * n);
  ComplexVector pad(len), spec(len), back(len);
  std::copy(x.begin(), x.end(), pad.begin());
  FftPlan fwd(len, FftPlan::Direction::Forward), inv(len, FftPlan::Direction::Backward);
  fwd.execute(pad, spec);
  for (auto& s : spec) s = s * std::conj(s);
  inv.execute(spec, back);
  const double peak = std::abs(back[0]);
  double side = 0.0;
  for (std::size_t i = 1; i < len; ++i) side = std::max(side, std::abs(back[i]));
  CHECK(peak > 5.0 * side);
}

TEST_CASE("iq file round trip and sidecar") {
  const auto frame = generate_frame(short_waveform(2));
  const auto dir = std::filesystem::temp_directory_path() / "multiscout_iq_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "frame.iq";
  write_iq_file(path, frame.samples);
  CHECK(std::filesystem::file_size(path) == frame.size() * 8);
  const auto back = read_iq_file(path);
  REQUIRE(back.size() == frame.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(std::abs(back[i] - frame.samples[i]) < 1e-6);
  write_iq_sidecar(path, frame.size(), frame.sample_rate_hz, {{"fft_len", 1024}});
  CHECK(std::filesystem::exists(dir / "frame.iq.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("waveform config validation") {
  WaveformConfig c;
  c.guard_tones = 600;
  CHECK_THROWS(c.validate());
  c = WaveformConfig{};
  c.cp_rest_len = 2000;
  CHECK_THROWS(c.validate());
  c = WaveformConfig{};
  c.num_symbols = 0;
  CHECK_THROWS(c.validate());
}
