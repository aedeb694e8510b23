#pragma once

#include <filesystem>

#include "multiscout/harness/config.hpp"
#include "multiscout/harness/report.hpp"

namespace multiscout {

// Repeats the configured experiment cfg.trials times. keep_first_maps keeps
// the range-Doppler maps of trial 0 for CSV or heatmap output.
MetricsReport run_trials(const ScenarioConfig& cfg, bool keep_first_maps = false);

// Linear and circular trajectories, KF and EKF, cfg.trials runs.
MetricsReport run_track(const ScenarioConfig& cfg);

MetricsReport run_experiment(const ScenarioConfig& cfg, bool keep_first_maps = false);

struct RunOutcome {
  MetricsReport report;
  int exit_code = 0;  // 0 ok, 2 every trial failed
  std::filesystem::path output_path;
};

// Runs and writes <output_dir>/<mode>/<seed>/: config.json, metrics.json,
// tables.md, fixes.csv plus per-mode CSV artefacts.
RunOutcome run_and_write(const ScenarioConfig& cfg);

}  // namespace multiscout
