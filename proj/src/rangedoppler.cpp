#include "multiscout/rangedoppler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <string>

#include "multiscout/fft.hpp"
#include "multiscout/parallel.hpp"

namespace multiscout {

std::vector<double> DopplerGrid::values() const {
  std::vector<double> v(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) v[static_cast<std::size_t>(i)] = value(i);
  return v;
}

void DopplerGrid::validate() const {
  if (points < 3 || points % 2 == 0)
    throw std::invalid_argument("DopplerGrid: points must be odd and >= 3");
  if (!(span_hz > 0.0)) throw std::invalid_argument("DopplerGrid: span_hz must be positive");
}

namespace {

struct BlockPlan {
  int block_len = 0;
  int order = 0;
};

// Smallest P with phi^(P+1)/(P+1)! * e^phi <= tol, where phi bounds the
// phase excursion from the block centre.
int series_order_for(int block_len, double max_doppler_hz, double sample_period_s, double tol) {
  const double phi = kPi * max_doppler_hz * sample_period_s * block_len;
  double term = std::exp(phi);
  for (int p = 0; p < 64; ++p) {
    term *= phi / (p + 1);
    if (term <= tol) return p;
  }
  throw std::invalid_argument("CafProcessor: phase series does not converge for this block length");
}

BlockPlan choose_plan(std::size_t n_total, int delay_bins, int doppler_points, double max_doppler_hz,
                      double sample_period_s, const CafOptions& options) {
  auto evaluate = [&](int len) {
    const int order = series_order_for(len, max_doppler_hz, sample_period_s, options.taylor_tol);
    const double s = static_cast<double>(next_fast_fft_size(static_cast<std::size_t>(len + delay_bins - 1)));
    const double blocks = std::ceil(static_cast<double>(n_total) / len);
    const double fft_cost = blocks * (order + 2) * 5.0 * s * std::log2(s);
    const double gemm_cost = 8.0 * delay_bins * blocks * (order + 1) * doppler_points;
    return std::pair{fft_cost + gemm_cost, order};
  };
  if (options.block_len > 0) return {options.block_len, evaluate(options.block_len).second};
  BlockPlan best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int len = 64; len <= 4096; len *= 2) {
    const auto [cost, order] = evaluate(len);
    if (cost < best_cost) {
      best_cost = cost;
      best = {len, order};
    }
  }
  return best;
}

void check_inputs(const ReceiverCapture& capture, const BasebandFrame& frame, int delay_bins) {
  if (delay_bins <= 0) throw std::invalid_argument("compute_caf: delay_bins must be positive");
  if (static_cast<std::size_t>(delay_bins) > capture.samples.size())
    throw std::invalid_argument("compute_caf: delay_bins exceeds capture length");
  if (capture.sample_rate_hz != 0.0 && capture.sample_rate_hz != frame.sample_rate_hz)
    throw std::invalid_argument("compute_caf: capture and frame sample rates differ");
}

RangeDopplerMap empty_map(const BasebandFrame& frame, int delay_bins, const DopplerGrid& grid,
                          int receiver) {
  RangeDopplerMap map;
  map.caf = Eigen::MatrixXcd::Zero(delay_bins, grid.points);
  map.delay_bin_m = kSpeedOfLight / frame.sample_rate_hz;
  map.doppler_grid = grid;
  map.receiver_index = receiver;
  map.carrier_freq_hz = frame.carrier_freq_hz;
  return map;
}

}  // namespace

struct CafProcessor::Impl {
  BasebandFrame frame;
  int delay_bins = 0;
  DopplerGrid grid;
  CafOptions options;
  int block_len = 0;
  int order = 0;
  std::size_t fft_size = 0;
  std::size_t blocks = 0;
  FftPlan forward;
  FftPlan backward;
  // conj(FFT(x_b * w_p)), indexed [p * blocks + b]
  std::vector<ComplexVector> reference_spectra;
  Eigen::MatrixXcd phase_terms;  // (blocks * (order + 1)) x doppler points

  Impl(const BasebandFrame& f, int d, const DopplerGrid& g, const CafOptions& o, BlockPlan plan)
      : frame(f),
        delay_bins(d),
        grid(g),
        options(o),
        block_len(plan.block_len),
        order(plan.order),
        fft_size(next_fast_fft_size(static_cast<std::size_t>(plan.block_len + d - 1))),
        blocks((f.size() + static_cast<std::size_t>(plan.block_len) - 1) /
               static_cast<std::size_t>(plan.block_len)),
        forward(fft_size, FftPlan::Direction::Forward),
        backward(fft_size, FftPlan::Direction::Backward) {}
};

CafProcessor::CafProcessor(const BasebandFrame& frame, int delay_bins, const DopplerGrid& grid,
                           const CafOptions& options) {
  grid.validate();
  if (delay_bins <= 0) throw std::invalid_argument("CafProcessor: delay_bins must be positive");
  if (frame.size() == 0) throw std::invalid_argument("CafProcessor: empty frame");
  const double ts = 1.0 / frame.sample_rate_hz;
  const auto plan = choose_plan(frame.size(), delay_bins, grid.points, grid.span_hz, ts, options);
  impl_ = std::make_unique<Impl>(frame, delay_bins, grid, options, plan);
  auto& im = *impl_;

  const auto len = static_cast<std::size_t>(im.block_len);
  const double centre = (im.block_len - 1) / 2.0;
  const std::size_t terms = static_cast<std::size_t>(im.order + 1);
  im.reference_spectra.assign(im.blocks * terms, ComplexVector{});

  parallel_for(im.blocks, options.threads, [&](std::size_t b) {
    ComplexVector seg(im.fft_size), spec(im.fft_size);
    const std::size_t start = b * len;
    const std::size_t count = std::min(len, im.frame.size() - start);
    for (std::size_t p = 0; p < terms; ++p) {
      std::fill(seg.begin(), seg.end(), Complex{});
      for (std::size_t r = 0; r < count; ++r) {
        const double w = std::pow((static_cast<double>(r) - centre) / im.block_len, static_cast<double>(p));
        seg[r] = im.frame.samples[start + r] * w;
      }
      im.forward.execute(seg, spec);
      for (auto& v : spec) v = std::conj(v);
      im.reference_spectra[p * im.blocks + b] = spec;
    }
  });

  im.phase_terms.resize(static_cast<Eigen::Index>(im.blocks * terms), grid.points);
  for (int k = 0; k < grid.points; ++k) {
    const double f = grid.value(k);
    const Complex step{0.0, -2.0 * kPi * f * ts * im.block_len};
    for (std::size_t b = 0; b < im.blocks; ++b) {
      const Complex base = std::polar(1.0, -2.0 * kPi * f * (static_cast<double>(b * len) + centre) * ts);
      Complex coef = base;
      for (std::size_t p = 0; p < terms; ++p) {
        if (p > 0) coef *= step / static_cast<double>(p);
        im.phase_terms(static_cast<Eigen::Index>(p * im.blocks + b), k) = coef;
      }
    }
  }
}

CafProcessor::~CafProcessor() = default;
CafProcessor::CafProcessor(CafProcessor&&) noexcept = default;
CafProcessor& CafProcessor::operator=(CafProcessor&&) noexcept = default;

int CafProcessor::delay_bins() const { return impl_->delay_bins; }
int CafProcessor::block_len() const { return impl_->block_len; }
int CafProcessor::series_order() const { return impl_->order; }
const DopplerGrid& CafProcessor::grid() const { return impl_->grid; }

RangeDopplerMap CafProcessor::compute(const ReceiverCapture& capture) const {
  const auto& im = *impl_;
  check_inputs(capture, im.frame, im.delay_bins);
  const auto& y = capture.samples;
  const auto len = static_cast<std::size_t>(im.block_len);
  const std::size_t terms = static_cast<std::size_t>(im.order + 1);
  const double inv_size = 1.0 / static_cast<double>(im.fft_size);

  Eigen::MatrixXcd moments(im.delay_bins, static_cast<Eigen::Index>(im.blocks * terms));
  parallel_for(im.blocks, im.options.threads, [&](std::size_t b) {
    ComplexVector seg(im.fft_size), spec(im.fft_size), prod(im.fft_size), corr(im.fft_size);
    const std::size_t start = b * len;
    for (std::size_t i = 0; i < im.fft_size; ++i)
      seg[i] = start + i < y.size() ? y[start + i] : Complex{};
    im.forward.execute(seg, spec);
    for (std::size_t p = 0; p < terms; ++p) {
      const auto& ref = im.reference_spectra[p * im.blocks + b];
      for (std::size_t i = 0; i < im.fft_size; ++i) prod[i] = spec[i] * ref[i];
      im.backward.execute(prod, corr);
      const auto col = static_cast<Eigen::Index>(p * im.blocks + b);
      for (int d = 0; d < im.delay_bins; ++d) moments(d, col) = corr[static_cast<std::size_t>(d)] * inv_size;
    }
  });

  auto map = empty_map(im.frame, im.delay_bins, im.grid, capture.receiver_index);
  map.caf.noalias() = moments * im.phase_terms;
  return map;
}

RangeDopplerMap compute_caf(const ReceiverCapture& capture, const BasebandFrame& frame,
                            int delay_bins, const DopplerGrid& grid, const CafOptions& options) {
  check_inputs(capture, frame, delay_bins);
  return CafProcessor(frame, delay_bins, grid, options).compute(capture);
}

RangeDopplerMap compute_caf_direct(const ReceiverCapture& capture, const BasebandFrame& frame,
                                   int delay_bins, const DopplerGrid& grid) {
  grid.validate();
  check_inputs(capture, frame, delay_bins);
  auto map = empty_map(frame, delay_bins, grid, capture.receiver_index);
  const auto& y = capture.samples;
  const auto& x = frame.samples;
  const double ts = 1.0 / frame.sample_rate_hz;
  for (int d = 0; d < delay_bins; ++d) {
    const std::size_t n_end = std::min(x.size(), y.size() - static_cast<std::size_t>(d));
    for (int k = 0; k < grid.points; ++k) {
      const double w = -2.0 * kPi * grid.value(k) * ts;
      Complex acc{};
      for (std::size_t n = 0; n < n_end; ++n)
        acc += y[n + static_cast<std::size_t>(d)] * std::conj(x[n]) * std::polar(1.0, w * static_cast<double>(n));
      map.caf(d, k) = acc;
    }
  }
  return map;
}

CoarsePeak coarse_peak(const RangeDopplerMap& map) {
  if (map.caf.size() == 0) throw std::invalid_argument("coarse_peak: empty map");
  const auto& g = map.doppler_grid;
  // Candidate order: ascending delay, then ascending |Doppler|, then index.
  std::vector<int> doppler_order(static_cast<std::size_t>(map.doppler_points()));
  std::iota(doppler_order.begin(), doppler_order.end(), 0);
  std::stable_sort(doppler_order.begin(), doppler_order.end(), [&](int a, int b) {
    return std::abs(a - g.zero_index()) < std::abs(b - g.zero_index());
  });
  CoarsePeak best;
  double best_mag = -1.0;
  for (int d = 0; d < map.delay_bins(); ++d) {
    for (int k : doppler_order) {
      const double m = map.magnitude(d, k);
      if (m > best_mag) {
        best_mag = m;
        best.delay_bin = d;
        best.doppler_index = k;
      }
    }
  }
  best.doppler_hz = g.value(best.doppler_index);
  return best;
}

double parabolic_refine(double m_minus, double m0, double m_plus) {
  const double denom = m_minus - 2.0 * m0 + m_plus;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp((m_minus - m_plus) / (2.0 * denom), -0.5, 0.5);
}

std::vector<double> row_brightness(const RangeDopplerMap& map) {
  std::vector<double> gamma(static_cast<std::size_t>(map.delay_bins()));
  for (int d = 0; d < map.delay_bins(); ++d) gamma[static_cast<std::size_t>(d)] = map.caf.row(d).cwiseAbs().sum();
  return gamma;
}

std::vector<int> detect_multi_delays(const RangeDopplerMap& map, int k, double rho) {
  if (k < 1) throw std::invalid_argument("detect_multi_delays: k must be >= 1");
  if (!(rho > 1.0)) throw std::invalid_argument("detect_multi_delays: rho must exceed 1");
  const auto gamma = row_brightness(map);
  const int rows = static_cast<int>(gamma.size());
  std::vector<int> order(gamma.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return gamma[static_cast<std::size_t>(a)] > gamma[static_cast<std::size_t>(b)];
  });

  auto at = [&](int d) { return d < 0 || d >= rows ? 0.0 : gamma[static_cast<std::size_t>(d)]; };
  std::vector<char> suppressed(gamma.size(), 0);
  std::vector<int> accepted;
  for (int d : order) {
    if (static_cast<int>(accepted.size()) == k) break;
    if (suppressed[static_cast<std::size_t>(d)]) continue;
    if (at(d) > rho * at(d - 1) && at(d) > rho * at(d + 1)) {
      accepted.push_back(d);
      for (int n : {d - 1, d + 1})
        if (n >= 0 && n < rows) suppressed[static_cast<std::size_t>(n)] = 1;
    }
  }
  if (static_cast<int>(accepted.size()) < k)
    throw DetectionError("detect_multi_delays: found " + std::to_string(accepted.size()) + " of " +
                         std::to_string(k) + " targets");
  return accepted;
}

DetectionPeak doppler_at_delay(const RangeDopplerMap& map, int delay_bin) {
  if (delay_bin < 0 || delay_bin >= map.delay_bins())
    throw std::out_of_range("doppler_at_delay: delay bin outside map");
  const auto& g = map.doppler_grid;
  const int cols = map.doppler_points();
  int best = 0;
  double best_mag = -1.0;
  for (int k = 0; k < cols; ++k) {
    const double m = map.magnitude(delay_bin, k);
    const bool closer = std::abs(k - g.zero_index()) < std::abs(best - g.zero_index());
    if (m > best_mag || (m == best_mag && closer)) {
      best_mag = m;
      best = k;
    }
  }

  double dk = 0.0;
  if (best > 0 && best < cols - 1)
    dk = parabolic_refine(map.magnitude(delay_bin, best - 1), best_mag, map.magnitude(delay_bin, best + 1));
  double dd = 0.0;
  if (delay_bin > 0 && delay_bin < map.delay_bins() - 1)
    dd = parabolic_refine(map.magnitude(delay_bin - 1, best), best_mag, map.magnitude(delay_bin + 1, best));

  DetectionPeak peak;
  peak.delay_bin = delay_bin;
  peak.doppler_index = best;
  peak.delay_bin_refined = delay_bin + dd;
  peak.doppler_hz_refined = g.value(best) + dk * g.step();
  peak.bistatic_range_m = peak.delay_bin_refined * map.delay_bin_m;
  peak.radial_velocity_mps = peak.doppler_hz_refined * kSpeedOfLight / map.carrier_freq_hz;
  peak.magnitude = best_mag;
  return peak;
}

DetectionPeak detect_single(const RangeDopplerMap& map) {
  return doppler_at_delay(map, coarse_peak(map).delay_bin);
}

int delay_bins_for_range(double max_range_m, double sample_rate_hz, double bias_m, int margin_bins) {
  if (!(max_range_m >= 0.0) || !(sample_rate_hz > 0.0))
    throw std::invalid_argument("delay_bins_for_range: non-positive range or rate");
  const double bin = kSpeedOfLight / sample_rate_hz;
  return static_cast<int>(std::ceil((max_range_m + std::abs(bias_m)) / bin)) + margin_bins;
}

void write_caf_csv(const RangeDopplerMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_caf_csv: cannot open " + path.string());
  out << std::setprecision(10) << "range_m";
  for (int k = 0; k < map.doppler_points(); ++k) out << ',' << map.doppler_grid.value(k);
  out << '\n';
  for (int d = 0; d < map.delay_bins(); ++d) {
    out << d * map.delay_bin_m;
    for (int k = 0; k < map.doppler_points(); ++k) out << ',' << map.magnitude(d, k);
    out << '\n';
  }
}

void write_caf_pgm(const RangeDopplerMap& map, const std::filesystem::path& path,
                   double dynamic_range_db) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_caf_pgm: cannot open " + path.string());
  const double peak = map.caf.cwiseAbs().maxCoeff();
  out << "P5\n" << map.doppler_points() << ' ' << map.delay_bins() << "\n255\n";
  for (int d = 0; d < map.delay_bins(); ++d) {
    for (int k = 0; k < map.doppler_points(); ++k) {
      const double m = map.magnitude(d, k);
      const double db = peak > 0.0 && m > 0.0 ? 20.0 * std::log10(m / peak) : -dynamic_range_db;
      const double level = std::clamp(1.0 + db / dynamic_range_db, 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(level * 255.0))));
    }
  }
}

}  // namespace multiscout
