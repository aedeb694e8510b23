#include "multiscout/harness/runner.hpp"

#include <fstream>
#include <mutex>
#include <random>

#include "multiscout/parallel.hpp"
#include "multiscout/rng.hpp"

namespace multiscout {
namespace {

std::vector<Vector4> synthetic_measurements(const std::vector<TargetState>& truth, const NoiseModel& noise,
                                            std::uint64_t seed) {
  const Matrix4 chol = noise.R.llt().matrixL();
  std::vector<Vector4> out;
  out.reserve(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(k)), SeedStream::Noise, 0));
    std::normal_distribution<double> n01(0.0, 1.0);
    Vector4 w;
    for (int i = 0; i < 4; ++i) w(i) = n01(rng);
    const auto& s = truth[k];
    out.push_back(Vector4{s.pos(0), s.pos(1), s.vel(0), s.vel(1)} + chol * w);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

MetricsReport run_trials(const ScenarioConfig& cfg, bool keep_first_maps) {
  cfg.validate();
  MetricsReport rep;
  rep.mode = cfg.mode;
  rep.trial_mode = cfg.trial_mode();
  rep.seed = cfg.seed;
  rep.delay_bins = auto_delay_bins(cfg);
  const PipelineContext ctx(cfg, rep.delay_bins);
  rep.trials.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for(rep.trials.size(), cfg.threads, [&](std::size_t i) {
    rep.trials[i] = run_indexed_trial(cfg, ctx, static_cast<int>(i), keep_first_maps && i == 0);
  });
  rep.aggregate = aggregate_trials(rep.trials, rep.trial_mode);
  return rep;
}

MetricsReport run_track(const ScenarioConfig& cfg) {
  cfg.validate();
  MetricsReport rep;
  rep.mode = rep.trial_mode = Mode::Track;
  rep.seed = cfg.seed;
  const auto& tc = cfg.tracking;
  const auto runs = static_cast<std::size_t>(cfg.trials);

  rep.tracks.resize(runs);
  std::vector<Vector> points;
  for (std::size_t i = 0; i < runs; ++i) {
    auto& tr = rep.tracks[i];
    tr.index = static_cast<int>(i);
    tr.seed = trial_seed(cfg.seed, tr.index);
    tr.truth_linear = generate_motion(tc.linear, derive_seed(tr.seed, 0));
    tr.truth_circular = generate_motion(tc.circular, derive_seed(tr.seed, 1));
    for (const auto* traj : {&tr.truth_linear, &tr.truth_circular})
      for (const auto& s : *traj) points.push_back(s.pos);
  }

  if (tc.full_chain) {
    rep.delay_bins = auto_delay_bins(cfg, points);
    const PipelineContext ctx(cfg, rep.delay_bins);
    struct Step {
      std::size_t run;
      int profile;
      std::size_t k;
    };
    std::vector<Step> steps;
    for (std::size_t i = 0; i < runs; ++i) {
      rep.tracks[i].meas_linear.resize(rep.tracks[i].truth_linear.size());
      rep.tracks[i].meas_circular.resize(rep.tracks[i].truth_circular.size());
      for (int p = 0; p < 2; ++p) {
        const auto n = p == 0 ? rep.tracks[i].truth_linear.size() : rep.tracks[i].truth_circular.size();
        for (std::size_t k = 0; k < n; ++k) steps.push_back({i, p, k});
      }
    }
    std::vector<std::string> failures(runs);
    std::vector<char> failed(runs, 0);
    std::mutex failure_mutex;
    parallel_for(steps.size(), cfg.threads, [&](std::size_t j) {
      const auto [i, p, k] = steps[j];
      auto& tr = rep.tracks[i];
      {
        std::lock_guard lock(failure_mutex);
        if (failed[i]) return;
      }
      const auto& truth = p == 0 ? tr.truth_linear : tr.truth_circular;
      Scene scene = cfg.scene;
      scene.targets = {truth[k]};
      const auto seed = derive_seed(derive_seed(tr.seed, static_cast<std::uint64_t>(p)), static_cast<std::uint64_t>(k));
      try {
        (p == 0 ? tr.meas_linear : tr.meas_circular)[k] = measure_fix(cfg, ctx, scene, seed);
      } catch (const DetectionError& e) {
        std::lock_guard lock(failure_mutex);
        failed[i] = 1;
        failures[i] = "step " + std::to_string(k) + ": " + e.what();
      }
    });
    for (std::size_t i = 0; i < runs; ++i) {
      rep.tracks[i].ok = !failed[i];
      rep.tracks[i].failure = failures[i];
    }
  } else {
    for (auto& tr : rep.tracks) {
      tr.meas_linear = synthetic_measurements(tr.truth_linear, tc.noise, derive_seed(tr.seed, 0));
      tr.meas_circular = synthetic_measurements(tr.truth_circular, tc.noise, derive_seed(tr.seed, 1));
      tr.ok = true;
    }
  }

  for (auto& tr : rep.tracks) {
    if (!tr.ok) continue;
    tr.kf_linear = track_sequence(tr.meas_linear, FilterKind::Kf, tc.noise, tr.truth_linear);
    tr.ekf_linear = track_sequence(tr.meas_linear, FilterKind::Ekf, tc.noise, tr.truth_linear);
    tr.kf_circular = track_sequence(tr.meas_circular, FilterKind::Kf, tc.noise, tr.truth_circular);
    tr.ekf_circular = track_sequence(tr.meas_circular, FilterKind::Ekf, tc.noise, tr.truth_circular);
  }
  rep.track_summary = summarize_tracks(rep.tracks);
  return rep;
}

MetricsReport run_experiment(const ScenarioConfig& cfg, bool keep_first_maps) {
  return cfg.mode == Mode::Track ? run_track(cfg) : run_trials(cfg, keep_first_maps);
}

RunOutcome run_and_write(const ScenarioConfig& cfg) {
  const bool want_maps = cfg.mode != Mode::Track && (cfg.outputs.caf_csv || cfg.outputs.heatmap_pgm);
  RunOutcome out;
  out.report = run_experiment(cfg, want_maps);
  const auto& rep = out.report;
  out.output_path = cfg.output_dir / to_string(cfg.mode) / std::to_string(cfg.seed);
  std::filesystem::create_directories(out.output_path);
  const auto& dir = out.output_path;

  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  write_text(dir / "metrics.json", report_json(rep).dump(2) + "\n");
  write_text(dir / "tables.md", tables_markdown(rep));

  if (cfg.mode == Mode::Track) {
    for (const auto& tr : rep.tracks) {
      if (!tr.ok) continue;
      const std::string stem = "track_run" + std::to_string(tr.index) + "_";
      write_track_csv(tr.meas_linear, tr.kf_linear, tr.truth_linear, dir / (stem + "linear_kf.csv"));
      write_track_csv(tr.meas_linear, tr.ekf_linear, tr.truth_linear, dir / (stem + "linear_ekf.csv"));
      write_track_csv(tr.meas_circular, tr.kf_circular, tr.truth_circular, dir / (stem + "circular_kf.csv"));
      write_track_csv(tr.meas_circular, tr.ekf_circular, tr.truth_circular, dir / (stem + "circular_ekf.csv"));
    }
    out.exit_code = rep.track_summary.succeeded == 0 ? 2 : 0;
    return out;
  }

  write_fixes_csv(rep, dir / "fixes.csv");
  if (!rep.trials.empty()) {
    const auto& first = rep.trials.front();
    for (const auto& map : first.maps) {
      const std::string stem = "caf_rx" + std::to_string(map.receiver_index + 1);
      if (cfg.outputs.caf_csv) write_caf_csv(map, dir / (stem + ".csv"));
      if (cfg.outputs.heatmap_pgm) write_caf_pgm(map, dir / (stem + ".pgm"));
    }
    if (first.association) write_hypothesis_csv(*first.association, dir / "hypotheses.csv");
  }
  out.exit_code = rep.aggregate.succeeded == 0 ? 2 : 0;
  return out;
}

}  // namespace multiscout
