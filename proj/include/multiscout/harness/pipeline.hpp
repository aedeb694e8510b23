#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multiscout/association.hpp"
#include "multiscout/harness/config.hpp"
#include "multiscout/rangedoppler.hpp"
#include "multiscout/tracking.hpp"

namespace multiscout {

// Delay grid covering the random-target box corners, the fixed targets and
// any extra points, plus the clock bias and the configured margin.
int auto_delay_bins(const ScenarioConfig& cfg, std::span<const Vector> extra_points = {});

// Frame and CAF precomputation shared by every trial of a run.
struct PipelineContext {
  BasebandFrame frame;
  CafProcessor caf;

  PipelineContext(const ScenarioConfig& cfg, int delay_bins);
};

struct ReceiverEstimate {
  int receiver = 0;
  int truth_target = -1;  // physical target the detection belongs to
  int delay_bin = 0;
  double true_range_m = 0.0;  // geometric, without clock bias
  double est_range_m = 0.0;
  double true_radial_mps = 0.0;
  double est_radial_mps = 0.0;
  double doppler_hz = 0.0;
  double magnitude = 0.0;
};

struct TargetEstimate {
  int truth_target = 0;
  Vector true_pos, est_pos, true_vel, est_vel;
  double true_speed_mps = 0.0, est_speed_mps = 0.0;
  double true_heading_deg = 0.0, est_heading_deg = 0.0;
  double cost = 0.0;
  double position_error_m = 0.0;
  double speed_error_mps = 0.0;
  double angle_error_deg = 0.0;
};

struct TrialMetrics {
  double trilateration_cost = 0.0;
  double rms_range_error_m = 0.0;  // sqrt(cost / number of range residuals)
  double rms_range_error_pct = 0.0;  // of mean true bistatic range
  double truth_range_rms_m = 0.0;  // measured minus true range, bias removed
  double speed_error_mps = 0.0;
  double speed_error_pct = 0.0;  // of mean true speed
  double angle_error_deg = 0.0;
  double angle_error_pct = 0.0;  // of 360 degrees
  double position_error_m = 0.0;
  double mean_true_range_m = 0.0;
  double mean_true_speed_mps = 0.0;
  std::optional<double> bias_true_s;
  std::optional<double> bias_est_s;
};

struct TrialResult {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  Scene scene;
  std::vector<ReceiverEstimate> receivers;
  std::vector<TargetEstimate> targets;
  TrialMetrics metrics;
  std::optional<AssociationResult> association;
  bool association_correct = false;
  std::vector<RangeDopplerMap> maps;  // only when requested
};

std::uint64_t trial_seed(std::uint64_t master, int index);

// Random targets per cfg.random, redrawn until clear of t, every r_m and
// each other.
Scene draw_random_scene(const ScenarioConfig& cfg, std::uint64_t seed);
Scene trial_scene(const ScenarioConfig& cfg, std::uint64_t seed);

std::vector<ReceiverCapture> synthesize_captures(const ScenarioConfig& cfg, const PipelineContext& ctx,
                                                 const Scene& scene, std::uint64_t seed);

// Whole chain for one scene: captures, CAF, peaks, solve, velocity, metrics.
// Detection and association failures are reported through TrialResult::ok.
TrialResult run_trial(const ScenarioConfig& cfg, const PipelineContext& ctx, const Scene& scene,
                      std::uint64_t seed, bool keep_maps);

// Trial `index` of the run: seed and scene derived from cfg.seed.
TrialResult run_indexed_trial(const ScenarioConfig& cfg, const PipelineContext& ctx, int index,
                              bool keep_maps);

// [x, y, v_x, v_y] fix from the single-target chain on a 2D scene.
Vector4 measure_fix(const ScenarioConfig& cfg, const PipelineContext& ctx, const Scene& scene,
                    std::uint64_t seed);

}  // namespace multiscout
