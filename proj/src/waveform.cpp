#include "multiscout/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "multiscout/fft.hpp"

namespace multiscout {

GoldPolynomials GoldPolynomials::standard(int register_len) {
  switch (register_len) {
    case 3:
      return {3, {3, 1}, {3, 2}};
    case 12:
      return {};
    default:
      throw std::invalid_argument("GoldPolynomials: no built-in pair for register length " +
                                  std::to_string(register_len));
  }
}

void GoldPolynomials::validate() const {
  if (register_len < 2 || register_len > 31)
    throw std::invalid_argument("GoldPolynomials: register length must be in [2, 31]");
  for (const auto* taps : {&taps_a, &taps_b}) {
    if (taps->empty() || *std::max_element(taps->begin(), taps->end()) != register_len)
      throw std::invalid_argument("GoldPolynomials: taps must include the register length");
    for (int t : *taps)
      if (t < 1 || t > register_len) throw std::invalid_argument("GoldPolynomials: tap out of range");
  }
}

int WaveformConfig::active_tones() const {
  const int half = fft_len / 2 - guard_tones - 1;
  return dc_null ? 2 * half : 2 * half + 1;
}

std::vector<int> WaveformConfig::active_bins() const {
  const int half = fft_len / 2 - guard_tones - 1;
  std::vector<int> bins;
  bins.reserve(static_cast<std::size_t>(active_tones()));
  for (int k = -half; k <= half; ++k) {
    if (k == 0 && dc_null) continue;
    bins.push_back(k < 0 ? k + fft_len : k);
  }
  return bins;
}

int WaveformConfig::cp_len(int symbol_index) const {
  return symbol_index % symbols_per_slot == 0 ? cp_first_len : cp_rest_len;
}

std::size_t WaveformConfig::frame_length() const {
  std::size_t total = 0;
  for (int s = 0; s < num_symbols; ++s) total += static_cast<std::size_t>(fft_len + cp_len(s));
  return total;
}

void WaveformConfig::validate() const {
  if (!(carrier_freq_hz > 0.0) || !(subcarrier_spacing_hz > 0.0))
    throw std::invalid_argument("WaveformConfig: carrier and subcarrier spacing must be positive");
  if (fft_len < 8 || fft_len % 2 != 0)
    throw std::invalid_argument("WaveformConfig: fft_len must be even and >= 8");
  if (cp_rest_len < 0 || cp_first_len < cp_rest_len || cp_first_len > fft_len)
    throw std::invalid_argument("WaveformConfig: require fft_len >= cp_first_len >= cp_rest_len >= 0");
  if (symbols_per_slot < 1 || num_symbols < 1)
    throw std::invalid_argument("WaveformConfig: symbol counts must be positive");
  if (guard_tones < 0 || fft_len / 2 - guard_tones - 1 < 1)
    throw std::invalid_argument("WaveformConfig: guard tones leave no active subcarriers");
  gold.validate();
  const std::size_t period = (std::size_t{1} << gold.register_len) - 1;
  if (period < static_cast<std::size_t>(active_tones()))
    throw std::invalid_argument("WaveformConfig: Gold period shorter than the active tone count");
}

WaveformConfig WaveformConfig::uniform_cp() {
  WaveformConfig cfg;
  cfg.cp_first_len = cfg.fft_len / 16;
  cfg.cp_rest_len = cfg.fft_len / 16;
  return cfg;
}

std::vector<std::uint8_t> generate_m_sequence(int register_len, std::span<const int> taps,
                                              std::uint32_t seed, std::size_t length) {
  if (register_len < 2 || register_len > 31)
    throw std::invalid_argument("generate_m_sequence: register length must be in [2, 31]");
  const std::uint32_t mask = (1u << register_len) - 1u;
  if ((seed & mask) == 0)
    throw std::invalid_argument("generate_m_sequence: all-zero register state is degenerate");
  // a[i + n] = a[i] ^ sum_{t in taps, t < n} a[i + t]; bit i of the seed is a[i].
  std::vector<std::uint8_t> seq(length + static_cast<std::size_t>(register_len));
  for (int i = 0; i < register_len; ++i) seq[static_cast<std::size_t>(i)] = (seed >> i) & 1u;
  for (std::size_t i = 0; i < length; ++i) {
    std::uint8_t bit = seq[i];
    for (int t : taps)
      if (t < register_len) bit ^= seq[i + static_cast<std::size_t>(t)];
    seq[i + static_cast<std::size_t>(register_len)] = bit;
  }
  seq.resize(length);
  return seq;
}

std::vector<std::uint8_t> generate_gold_sequence(const GoldPolynomials& polys, std::size_t length,
                                                 std::uint32_t seed_a, std::uint32_t seed_b) {
  polys.validate();
  const std::size_t period = (std::size_t{1} << polys.register_len) - 1;
  if (length > period)
    throw std::invalid_argument("generate_gold_sequence: length " + std::to_string(length) +
                                " exceeds period " + std::to_string(period));
  auto a = generate_m_sequence(polys.register_len, polys.taps_a, seed_a, length);
  const auto b = generate_m_sequence(polys.register_len, polys.taps_b, seed_b, length);
  for (std::size_t i = 0; i < length; ++i) a[i] ^= b[i];
  return a;
}

std::vector<ComplexVector> build_prs_symbols(const WaveformConfig& cfg,
                                             std::span<const std::uint8_t> chips) {
  cfg.validate();
  const auto bins = cfg.active_bins();
  const std::size_t active = bins.size();
  if (chips.size() < active)
    throw std::invalid_argument("build_prs_symbols: need at least " + std::to_string(active) +
                                " chips per symbol, got " + std::to_string(chips.size()));
  std::vector<ComplexVector> grids(static_cast<std::size_t>(cfg.num_symbols),
                                   ComplexVector(static_cast<std::size_t>(cfg.fft_len)));
  for (std::size_t s = 0; s < grids.size(); ++s) {
    const std::size_t offset = s * active;
    for (std::size_t i = 0; i < active; ++i) {
      const std::uint8_t chip = chips[(offset + i) % chips.size()];
      grids[s][static_cast<std::size_t>(bins[i])] = chip ? -1.0 : 1.0;
    }
  }
  return grids;
}

BasebandFrame ofdm_modulate(std::span<const ComplexVector> grids, const WaveformConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.fft_len);
  BasebandFrame frame;
  frame.sample_rate_hz = cfg.sample_rate_hz();
  frame.carrier_freq_hz = cfg.carrier_freq_hz;
  frame.fft_len = cfg.fft_len;

  std::size_t total = 0;
  for (std::size_t s = 0; s < grids.size(); ++s) {
    if (grids[s].size() != n)
      throw std::invalid_argument("ofdm_modulate: grid " + std::to_string(s) + " has " +
                                  std::to_string(grids[s].size()) + " bins, expected " +
                                  std::to_string(n));
    total += n + static_cast<std::size_t>(cfg.cp_len(static_cast<int>(s)));
  }
  frame.samples.reserve(total);

  const FftPlan ifft(n, FftPlan::Direction::Backward);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  ComplexVector body(n);
  for (std::size_t s = 0; s < grids.size(); ++s) {
    ifft.execute(grids[s], body);
    for (auto& v : body) v *= scale;
    const auto cp = static_cast<std::size_t>(cfg.cp_len(static_cast<int>(s)));
    frame.symbol_boundaries.push_back(frame.samples.size());
    frame.cp_lengths.push_back(static_cast<int>(cp));
    frame.samples.insert(frame.samples.end(), body.end() - static_cast<std::ptrdiff_t>(cp), body.end());
    frame.samples.insert(frame.samples.end(), body.begin(), body.end());
  }
  return frame;
}

double mean_power(std::span<const Complex> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : samples) acc += std::norm(v);
  return acc / static_cast<double>(samples.size());
}

void normalize_power(BasebandFrame& frame, double target_power) {
  const double p = mean_power(frame.samples);
  if (p <= 0.0) return;
  const double g = std::sqrt(target_power / p);
  for (auto& v : frame.samples) v *= g;
}

BasebandFrame generate_frame(const WaveformConfig& cfg) {
  cfg.validate();
  const std::size_t period = (std::size_t{1} << cfg.gold.register_len) - 1;
  const auto chips = generate_gold_sequence(cfg.gold, period, cfg.gold_seed_a, cfg.gold_seed_b);
  const auto grids = build_prs_symbols(cfg, chips);
  auto frame = ofdm_modulate(grids, cfg);
  normalize_power(frame);
  return frame;
}

}  // namespace multiscout
