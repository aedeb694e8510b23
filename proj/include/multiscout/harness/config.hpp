#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "multiscout/association.hpp"
#include "multiscout/rangedoppler.hpp"
#include "multiscout/scene.hpp"
#include "multiscout/solver.hpp"
#include "multiscout/tracking.hpp"
#include "multiscout/waveform.hpp"

namespace multiscout {

enum class Mode { Single, Bias, ThreeD, Multi, MonteCarlo, Track };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);  // throws ConfigError

enum class TargetSource { Fixed, Random };

// Random target draws for Monte-Carlo style runs.
struct RandomTargetSpec {
  int count = 1;
  Vector area_lo = Vector::Zero(2);
  Vector area_hi = Vector::Constant(2, 500.0);
  double speed_min_mps = 20.0;
  double speed_max_mps = 30.0;
  double max_elevation_deg = 45.0;  // 3D only; elevation uniform in +-this
  double rcs_m2 = 4.0;
  double min_clearance_m = 10.0;    // redraw when this close to t or any r_m
  double min_separation_m = 100.0;  // between targets of one scene
};

struct TrackingConfig {
  bool full_chain = true;  // false: truth plus Gaussian noise drawn from R
  NoiseModel noise{};
  MotionProfile linear{};
  MotionProfile circular{};
};

struct OutputOptions {
  bool caf_csv = true;
  bool heatmap_pgm = false;
};

struct ScenarioConfig {
  Mode mode = Mode::Single;
  Mode montecarlo_base = Mode::Single;  // experiment repeated in montecarlo mode
  std::uint64_t seed = 1;
  int trials = 1;
  int threads = 1;
  std::filesystem::path output_dir = "out";

  WaveformConfig waveform{};
  LinkBudget link{};
  AmplitudeModel amplitude = AmplitudeModel::Unit;
  bool include_direct_path = false;
  bool add_noise = true;
  double direct_path_gain_db = 30.0;
  bool remove_direct_path = false;
  DirectPathOptions direct_path{};

  Scene scene{};
  TargetSource target_source = TargetSource::Fixed;
  RandomTargetSpec random{};

  DopplerGrid doppler{};
  int delay_bins = 0;  // 0: derived from the geometry
  int delay_margin_bins = 16;
  int caf_block_len = 0;
  double detection_rho = 1.5;
  double min_peak_to_mean = 10.0;  // single-target detection sanity threshold

  SolverSettings solver{};
  AssociationSettings association{};
  TrackingConfig tracking{};
  OutputOptions outputs{};

  // The experiment a trial runs: montecarlo_base in montecarlo mode.
  Mode trial_mode() const { return mode == Mode::MonteCarlo ? montecarlo_base : mode; }
  bool estimate_bias() const { return trial_mode() == Mode::Bias; }
  int num_targets() const;
  void validate() const;  // throws ConfigError
};

// Reference geometry and parameters for each mode.
ScenarioConfig default_config(Mode mode);
// Random-target repetition of `base` (single, bias, threed or multi).
ScenarioConfig montecarlo_config(Mode base);

nlohmann::json to_json(const ScenarioConfig& cfg);

// Missing keys keep the defaults of the mode named in the file (or of
// fallback_mode when absent). Unknown keys are rejected.
ScenarioConfig config_from_json(const nlohmann::json& j, Mode fallback_mode = Mode::Single);
ScenarioConfig load_config(const std::filesystem::path& path, Mode fallback_mode = Mode::Single);

// Geometry of the triangle and tetrahedron scenes.
Scene triangle_scene();
Scene four_receiver_scene();
Scene tetrahedron_scene();

}  // namespace multiscout
