#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "multiscout/common.hpp"
#include "multiscout/scene.hpp"
#include "multiscout/waveform.hpp"

namespace multiscout {

// Uniform grid over [-span_hz, +span_hz] with an odd number of points.
struct DopplerGrid {
  double span_hz = 400.0;
  int points = 401;

  static DopplerGrid tracking() { return {400.0, 41}; }

  double step() const { return 2.0 * span_hz / (points - 1); }
  double value(int index) const { return -span_hz + index * step(); }
  std::vector<double> values() const;
  int zero_index() const { return points / 2; }
  void validate() const;
};

struct RangeDopplerMap {
  Eigen::MatrixXcd caf;  // delay_bins x doppler points
  double delay_bin_m = 0.0;
  DopplerGrid doppler_grid;
  int receiver_index = 0;
  double carrier_freq_hz = 0.0;

  int delay_bins() const { return static_cast<int>(caf.rows()); }
  int doppler_points() const { return static_cast<int>(caf.cols()); }
  double magnitude(int d, int k) const { return std::abs(caf(d, k)); }
};

struct DetectionPeak {
  int delay_bin = 0;
  int doppler_index = 0;
  double delay_bin_refined = 0.0;
  double doppler_hz_refined = 0.0;
  double bistatic_range_m = 0.0;
  double radial_velocity_mps = 0.0;
  double magnitude = 0.0;
};

struct CoarsePeak {
  int delay_bin = 0;
  int doppler_index = 0;
  double doppler_hz = 0.0;
};

struct CafOptions {
  int threads = 1;
  int block_len = 0;          // 0: chosen by a cost model
  double taylor_tol = 1e-11;  // bound on the truncated phase-series remainder
};

// Cross-ambiguity against a fixed reference frame. The sum over n is split
// into blocks of L samples; within a block the Doppler phase is expanded as a
// short power series around the block centre, so the map becomes
//   CAF(d, f) = sum_{b,p} A[d, (b,p)] E[(b,p), f]
// where A holds windowed correlation moments (computed by FFT for all delays
// at once) and E the per-block phase terms. The frame side of A's FFTs and E
// are built once per processor.
class CafProcessor {
 public:
  CafProcessor(const BasebandFrame& frame, int delay_bins, const DopplerGrid& grid,
               const CafOptions& options = {});
  ~CafProcessor();
  CafProcessor(CafProcessor&&) noexcept;
  CafProcessor& operator=(CafProcessor&&) noexcept;

  RangeDopplerMap compute(const ReceiverCapture& capture) const;

  int delay_bins() const;
  int block_len() const;
  int series_order() const;  // P, highest power kept
  const DopplerGrid& grid() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RangeDopplerMap compute_caf(const ReceiverCapture& capture, const BasebandFrame& frame,
                            int delay_bins, const DopplerGrid& grid, const CafOptions& options = {});

// Literal triple loop. Reference for short frames only.
RangeDopplerMap compute_caf_direct(const ReceiverCapture& capture, const BasebandFrame& frame,
                                   int delay_bins, const DopplerGrid& grid);

// Ties go to the smallest delay, then the smallest |Doppler|, then the lower
// grid index.
CoarsePeak coarse_peak(const RangeDopplerMap& map);

// Vertex offset of the parabola through (-1, m_minus), (0, m0), (1, m_plus),
// clamped to [-0.5, 0.5]. Returns 0 when the triple is not strictly concave.
double parabolic_refine(double m_minus, double m0, double m_plus);

// gamma[d] = sum_f |CAF[d, f]|
std::vector<double> row_brightness(const RangeDopplerMap& map);

// Brightest rows that dominate both neighbours by factor rho, in descending
// brightness. Neighbours of an accepted row are not considered again. Throws
// DetectionError when fewer than k rows qualify.
std::vector<int> detect_multi_delays(const RangeDopplerMap& map, int k, double rho = 1.5);

// Doppler argmax along the row, parabolic refinement in Doppler, then in delay
// using the column of the best Doppler bin. Edge bins are not refined.
DetectionPeak doppler_at_delay(const RangeDopplerMap& map, int delay_bin);

// Coarse peak plus refinement.
DetectionPeak detect_single(const RangeDopplerMap& map);

// ceil((max_range_m + |bias_m|) / bin) + margin
int delay_bins_for_range(double max_range_m, double sample_rate_hz, double bias_m = 0.0,
                         int margin_bins = 16);

// Magnitude grid; first row holds the Doppler labels in Hz, first column the
// delay labels in metres.
void write_caf_csv(const RangeDopplerMap& map, const std::filesystem::path& path);

// 8-bit greyscale, dB relative to the peak over `dynamic_range_db`.
void write_caf_pgm(const RangeDopplerMap& map, const std::filesystem::path& path,
                   double dynamic_range_db = 50.0);

}  // namespace multiscout
