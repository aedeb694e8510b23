#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "multiscout/harness/config.hpp"
#include "multiscout/harness/pipeline.hpp"
#include "multiscout/tracking.hpp"

namespace multiscout {

// Means over the successful trials.
struct AggregateMetrics {
  int trials = 0;
  int succeeded = 0;
  int failed = 0;
  double trilateration_cost = 0.0;
  double rms_range_error_m = 0.0;
  double rms_range_error_pct = 0.0;
  double truth_range_rms_m = 0.0;
  double speed_error_mps = 0.0;
  double speed_error_pct = 0.0;
  double angle_error_deg = 0.0;
  double angle_error_pct = 0.0;
  double position_error_m = 0.0;
  double bias_error_ns = 0.0;  // |estimated - true|, bias runs only
  int association_correct = 0;
  double association_accuracy = 0.0;  // correct / succeeded, multi runs only
};

struct TrackRun {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  std::vector<TargetState> truth_linear, truth_circular;
  std::vector<Vector4> meas_linear, meas_circular;
  TrackResult kf_linear, ekf_linear, kf_circular, ekf_circular;
};

struct TrackSummary {
  int runs = 0;
  int succeeded = 0;
  double median_meas_linear = 0.0, median_kf_linear = 0.0, median_ekf_linear = 0.0;
  double median_meas_circular = 0.0, median_kf_circular = 0.0, median_ekf_circular = 0.0;
  double min_cov_eigenvalue = 0.0;
};

struct MetricsReport {
  Mode mode = Mode::Single;
  Mode trial_mode = Mode::Single;
  std::uint64_t seed = 0;
  int delay_bins = 0;
  std::vector<TrialResult> trials;
  AggregateMetrics aggregate;
  std::vector<TrackRun> tracks;
  TrackSummary track_summary;
};

AggregateMetrics aggregate_trials(const std::vector<TrialResult>& trials, Mode trial_mode);
TrackSummary summarize_tracks(const std::vector<TrackRun>& runs);
double median(std::vector<double> values);

nlohmann::json report_json(const MetricsReport& report);

// Markdown tables mirroring the per-receiver, per-target, performance,
// hypothesis and tracking tables of each experiment.
std::string tables_markdown(const MetricsReport& report);

void write_fixes_csv(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace multiscout
