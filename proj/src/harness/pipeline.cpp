#include "multiscout/harness/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "multiscout/rng.hpp"

namespace multiscout {
namespace {

constexpr std::uint64_t kSolverSeedIndex = 1;

SynthesisOptions synthesis_options(const ScenarioConfig& cfg, std::uint64_t seed) {
  SynthesisOptions o;
  o.seed = seed;
  o.include_direct_path = cfg.include_direct_path;
  o.add_noise = cfg.add_noise;
  o.amplitude = cfg.amplitude;
  o.direct_path_gain_db = cfg.direct_path_gain_db;
  return o;
}

SolverSettings solver_settings(const ScenarioConfig& cfg, std::uint64_t seed) {
  SolverSettings s = cfg.solver;
  s.seed = derive_seed(seed, SeedStream::Solver, kSolverSeedIndex);
  return s;
}

// Corners of an axis-aligned box.
std::vector<Vector> box_corners(const Vector& lo, const Vector& hi) {
  const auto d = lo.size();
  std::vector<Vector> out;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    Vector c(d);
    for (Eigen::Index i = 0; i < d; ++i) c(i) = (mask >> i) & 1u ? hi(i) : lo(i);
    out.push_back(c);
  }
  return out;
}

// Single-target detection on one map; throws DetectionError below threshold.
DetectionPeak detect_checked(const RangeDopplerMap& map, double min_peak_to_mean) {
  const auto peak = detect_single(map);
  const double mean = map.caf.cwiseAbs().mean();
  if (!(peak.magnitude > min_peak_to_mean * mean))
    throw DetectionError("receiver " + std::to_string(map.receiver_index) + ": no echo above " +
                         std::to_string(min_peak_to_mean) + "x the mean CAF level");
  return peak;
}

void fill_target_errors(TargetEstimate& t) {
  t.true_speed_mps = t.true_vel.norm();
  t.true_heading_deg = wrap_degrees(rad2deg(std::atan2(t.true_vel(1), t.true_vel(0))));
  t.position_error_m = (t.est_pos - t.true_pos).norm();
  t.speed_error_mps = std::abs(t.est_speed_mps - t.true_speed_mps);
  t.angle_error_deg = std::abs(wrap_degrees(t.est_heading_deg - t.true_heading_deg));
}

std::vector<RangeDopplerMap> compute_maps(const ScenarioConfig& cfg, const PipelineContext& ctx,
                                          const Scene& scene, std::uint64_t seed) {
  auto caps = synthesize_captures(cfg, ctx, scene, seed);
  std::vector<RangeDopplerMap> maps;
  maps.reserve(caps.size());
  for (const auto& c : caps) maps.push_back(ctx.caf.compute(c));
  return maps;
}

void run_single_target(const ScenarioConfig& cfg, const Scene& scene, std::uint64_t seed,
                       const std::vector<RangeDopplerMap>& maps, TrialResult& res) {
  const bool with_bias = cfg.estimate_bias();
  const auto& tg = scene.targets.front();
  const auto& t = scene.transmitter_pos;
  const double bias_m = kSpeedOfLight * scene.clock_bias_s;

  BistaticMeasurementSet meas;
  meas.transmitter_pos = t;
  meas.receiver_positions = scene.receivers;
  for (std::size_t m = 0; m < scene.receivers.size(); ++m) {
    const auto peak = detect_checked(maps[m], cfg.min_peak_to_mean);
    ReceiverEstimate r;
    r.receiver = static_cast<int>(m);
    r.truth_target = 0;
    r.delay_bin = peak.delay_bin;
    r.true_range_m = bistatic_range(tg.pos, t, scene.receivers[m]);
    r.est_range_m = peak.bistatic_range_m;
    r.true_radial_mps = bistatic_radial_velocity(tg.pos, tg.vel, t, scene.receivers[m]);
    r.est_radial_mps = peak.radial_velocity_mps;
    r.doppler_hz = peak.doppler_hz_refined;
    r.magnitude = peak.magnitude;
    res.receivers.push_back(r);
    meas.ranges_m.push_back(r.est_range_m);
    meas.radial_velocities_mps.push_back(r.est_radial_mps);
  }

  const auto fix = trilaterate(meas, solver_settings(cfg, seed), with_bias);
  const auto vel = estimate_velocity(fix, meas, cfg.solver.ridge_eps);

  TargetEstimate te;
  te.true_pos = tg.pos;
  te.true_vel = tg.vel;
  te.est_pos = fix.pos;
  te.est_vel = vel.vel;
  te.est_speed_mps = vel.speed_mps;
  te.est_heading_deg = vel.heading_deg;
  te.cost = fix.residual_cost;
  fill_target_errors(te);
  res.targets.push_back(te);

  auto& mt = res.metrics;
  const double m_count = static_cast<double>(res.receivers.size());
  double sum_true = 0.0, sum_sq = 0.0;
  for (const auto& r : res.receivers) {
    sum_true += r.true_range_m;
    sum_sq += std::pow(r.est_range_m - bias_m - r.true_range_m, 2);
  }
  mt.trilateration_cost = fix.residual_cost;
  mt.mean_true_range_m = sum_true / m_count;
  mt.rms_range_error_m = std::sqrt(fix.residual_cost / m_count);
  mt.rms_range_error_pct = mt.rms_range_error_m / mt.mean_true_range_m * 100.0;
  mt.truth_range_rms_m = std::sqrt(sum_sq / m_count);
  mt.mean_true_speed_mps = te.true_speed_mps;
  mt.speed_error_mps = te.speed_error_mps;
  mt.speed_error_pct = te.true_speed_mps > 0.0 ? te.speed_error_mps / te.true_speed_mps * 100.0 : 0.0;
  mt.angle_error_deg = te.angle_error_deg;
  mt.angle_error_pct = te.angle_error_deg / 360.0 * 100.0;
  mt.position_error_m = te.position_error_m;
  if (with_bias) {
    mt.bias_true_s = scene.clock_bias_s;
    mt.bias_est_s = fix.clock_bias_s;
  }
}

void run_multi_target(const ScenarioConfig& cfg, const Scene& scene, std::uint64_t seed,
                      const std::vector<RangeDopplerMap>& maps, TrialResult& res) {
  const int k = static_cast<int>(scene.targets.size());
  const auto& t = scene.transmitter_pos;
  const std::size_t m_count = scene.receivers.size();
  const double bias_m = kSpeedOfLight * scene.clock_bias_s;

  // Per receiver: K peaks ordered by ascending range.
  std::vector<std::vector<DetectionPeak>> peaks(m_count);
  std::vector<std::vector<double>> range_lists(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    for (int d : detect_multi_delays(maps[m], k, cfg.detection_rho)) peaks[m].push_back(doppler_at_delay(maps[m], d));
    std::sort(peaks[m].begin(), peaks[m].end(),
              [](const DetectionPeak& a, const DetectionPeak& b) { return a.bistatic_range_m < b.bistatic_range_m; });
    for (const auto& p : peaks[m]) range_lists[m].push_back(p.bistatic_range_m);
  }

  AssociationContext actx{t, scene.receivers, false};
  AssociationSettings as = cfg.association;
  as.solver = solver_settings(cfg, seed);
  as.threads = 1;
  auto assoc = associate_targets(range_lists, actx, as);
  const auto& best = assoc.best;

  // Nearest true target for every detection.
  std::vector<std::vector<int>> labels(m_count, std::vector<int>(static_cast<std::size_t>(k)));
  for (std::size_t m = 0; m < m_count; ++m)
    for (int i = 0; i < k; ++i) {
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double dist = std::abs(range_lists[m][static_cast<std::size_t>(i)] - bias_m -
                                     bistatic_range(scene.targets[static_cast<std::size_t>(j)].pos, t, scene.receivers[m]));
        if (dist < best_d) {
          best_d = dist;
          labels[m][static_cast<std::size_t>(i)] = j;
        }
      }
    }
  bool correct = true;
  std::vector<int> seen_labels;
  for (int tk = 0; tk < k; ++tk) {
    const int l0 = labels[0][static_cast<std::size_t>(best.permutations[0][static_cast<std::size_t>(tk)])];
    for (std::size_t m = 0; m < m_count; ++m)
      if (labels[m][static_cast<std::size_t>(best.permutations[m][static_cast<std::size_t>(tk)])] != l0) correct = false;
    if (std::find(seen_labels.begin(), seen_labels.end(), l0) != seen_labels.end()) correct = false;
    seen_labels.push_back(l0);
  }
  res.association_correct = correct;

  // Velocity per associated target, then match estimates to truth by the
  // permutation with the smallest summed position error.
  std::vector<VelocityFix> vels;
  for (int tk = 0; tk < k; ++tk) {
    BistaticMeasurementSet meas;
    meas.transmitter_pos = t;
    meas.receiver_positions = scene.receivers;
    for (std::size_t m = 0; m < m_count; ++m) {
      const auto& p = peaks[m][static_cast<std::size_t>(best.permutations[m][static_cast<std::size_t>(tk)])];
      meas.ranges_m.push_back(p.bistatic_range_m);
      meas.radial_velocities_mps.push_back(p.radial_velocity_mps);
    }
    vels.push_back(estimate_velocity(best.fixes[static_cast<std::size_t>(tk)], meas, cfg.solver.ridge_eps));
  }
  std::vector<int> sigma(static_cast<std::size_t>(k)), best_sigma;
  std::iota(sigma.begin(), sigma.end(), 0);
  double best_sum = std::numeric_limits<double>::infinity();
  do {
    double sum = 0.0;
    for (int tk = 0; tk < k; ++tk)
      sum += (best.fixes[static_cast<std::size_t>(tk)].pos - scene.targets[static_cast<std::size_t>(sigma[static_cast<std::size_t>(tk)])].pos).norm();
    if (sum < best_sum) {
      best_sum = sum;
      best_sigma = sigma;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));

  auto& mt = res.metrics;
  double sum_true_speed = 0.0;
  for (int tk = 0; tk < k; ++tk) {
    const int truth = best_sigma[static_cast<std::size_t>(tk)];
    const auto& tg = scene.targets[static_cast<std::size_t>(truth)];
    TargetEstimate te;
    te.truth_target = truth;
    te.true_pos = tg.pos;
    te.true_vel = tg.vel;
    te.est_pos = best.fixes[static_cast<std::size_t>(tk)].pos;
    te.est_vel = vels[static_cast<std::size_t>(tk)].vel;
    te.est_speed_mps = vels[static_cast<std::size_t>(tk)].speed_mps;
    te.est_heading_deg = vels[static_cast<std::size_t>(tk)].heading_deg;
    te.cost = best.per_target_costs[static_cast<std::size_t>(tk)];
    fill_target_errors(te);
    res.targets.push_back(te);
    mt.position_error_m += te.position_error_m / k;
    mt.speed_error_mps += te.speed_error_mps / k;
    mt.angle_error_deg += te.angle_error_deg / k;
    sum_true_speed += te.true_speed_mps;

    for (std::size_t m = 0; m < m_count; ++m) {
      const auto& p = peaks[m][static_cast<std::size_t>(best.permutations[m][static_cast<std::size_t>(tk)])];
      ReceiverEstimate r;
      r.receiver = static_cast<int>(m);
      r.truth_target = truth;
      r.delay_bin = p.delay_bin;
      r.true_range_m = bistatic_range(tg.pos, t, scene.receivers[m]);
      r.est_range_m = p.bistatic_range_m;
      r.true_radial_mps = bistatic_radial_velocity(tg.pos, tg.vel, t, scene.receivers[m]);
      r.est_radial_mps = p.radial_velocity_mps;
      r.doppler_hz = p.doppler_hz_refined;
      r.magnitude = p.magnitude;
      res.receivers.push_back(r);
    }
  }
  std::sort(res.receivers.begin(), res.receivers.end(), [](const auto& a, const auto& b) {
    return std::pair(a.receiver, a.truth_target) < std::pair(b.receiver, b.truth_target);
  });

  const double n_res = static_cast<double>(res.receivers.size());
  double sum_true = 0.0, sum_sq = 0.0;
  for (const auto& r : res.receivers) {
    sum_true += r.true_range_m;
    sum_sq += std::pow(r.est_range_m - bias_m - r.true_range_m, 2);
  }
  mt.trilateration_cost = best.total_cost;
  mt.mean_true_range_m = sum_true / n_res;
  mt.rms_range_error_m = std::sqrt(best.total_cost / n_res);
  mt.rms_range_error_pct = mt.rms_range_error_m / mt.mean_true_range_m * 100.0;
  mt.truth_range_rms_m = std::sqrt(sum_sq / n_res);
  mt.mean_true_speed_mps = sum_true_speed / k;
  mt.speed_error_pct = mt.mean_true_speed_mps > 0.0 ? mt.speed_error_mps / mt.mean_true_speed_mps * 100.0 : 0.0;
  mt.angle_error_pct = mt.angle_error_deg / 360.0 * 100.0;
  res.association = std::move(assoc);
}

}  // namespace

int auto_delay_bins(const ScenarioConfig& cfg, std::span<const Vector> extra_points) {
  if (cfg.delay_bins > 0) return cfg.delay_bins;
  const auto& s = cfg.scene;
  std::vector<Vector> points(extra_points.begin(), extra_points.end());
  for (const auto& t : s.targets) points.push_back(t.pos);
  if (cfg.target_source == TargetSource::Random && cfg.random.area_lo.size() == s.transmitter_pos.size())
    for (auto& c : box_corners(cfg.random.area_lo, cfg.random.area_hi)) points.push_back(c);
  double max_range = 0.0;
  for (const auto& p : points)
    for (const auto& r : s.receivers) max_range = std::max(max_range, bistatic_range(p, s.transmitter_pos, r));
  return delay_bins_for_range(max_range, cfg.waveform.sample_rate_hz(), kSpeedOfLight * s.clock_bias_s,
                              cfg.delay_margin_bins);
}

PipelineContext::PipelineContext(const ScenarioConfig& cfg, int delay_bins)
    : frame(generate_frame(cfg.waveform)),
      caf(frame, delay_bins, cfg.doppler, CafOptions{1, cfg.caf_block_len, 1e-11}) {}

std::uint64_t trial_seed(std::uint64_t master, int index) {
  return derive_seed(master, static_cast<std::uint64_t>(index));
}

Scene draw_random_scene(const ScenarioConfig& cfg, std::uint64_t seed) {
  const auto& spec = cfg.random;
  Scene scene = cfg.scene;
  scene.targets.clear();
  const int dims = scene.dims();
  Rng rng(derive_seed(seed, SeedStream::Scene, 0));
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  auto clear_of_sites = [&](const Vector& p) {
    if ((p - scene.transmitter_pos).norm() < spec.min_clearance_m) return false;
    for (const auto& r : scene.receivers)
      if ((p - r).norm() < spec.min_clearance_m) return false;
    for (const auto& t : scene.targets)
      if ((p - t.pos).norm() < spec.min_separation_m) return false;
    return true;
  };

  for (int k = 0; k < spec.count; ++k) {
    Vector pos(dims);
    bool placed = false;
    for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
      for (int i = 0; i < dims; ++i) pos(i) = uniform(spec.area_lo(i), spec.area_hi(i));
      placed = clear_of_sites(pos);
    }
    if (!placed) throw ConfigError("random targets: cannot satisfy the clearance and separation limits");
    const double speed = uniform(spec.speed_min_mps, spec.speed_max_mps);
    const double heading = deg2rad(uniform(0.0, 360.0));
    Vector vel(dims);
    if (dims == 2) {
      vel << speed * std::cos(heading), speed * std::sin(heading);
    } else {
      const double el = deg2rad(uniform(-spec.max_elevation_deg, spec.max_elevation_deg));
      vel << speed * std::cos(el) * std::cos(heading), speed * std::cos(el) * std::sin(heading),
          speed * std::sin(el);
    }
    scene.targets.push_back({pos, vel, spec.rcs_m2});
  }
  return scene;
}

Scene trial_scene(const ScenarioConfig& cfg, std::uint64_t seed) {
  return cfg.target_source == TargetSource::Random ? draw_random_scene(cfg, seed) : cfg.scene;
}

std::vector<ReceiverCapture> synthesize_captures(const ScenarioConfig& cfg, const PipelineContext& ctx,
                                                 const Scene& scene, std::uint64_t seed) {
  const auto opts = synthesis_options(cfg, seed);
  std::vector<ReceiverCapture> caps;
  for (int m = 0; m < static_cast<int>(scene.receivers.size()); ++m) {
    auto cap = synthesize_capture(ctx.frame, scene, m, cfg.link, opts);
    if (cfg.remove_direct_path) cap = remove_direct_path(cap, ctx.frame, cfg.direct_path).capture;
    caps.push_back(std::move(cap));
  }
  return caps;
}

TrialResult run_trial(const ScenarioConfig& cfg, const PipelineContext& ctx, const Scene& scene,
                      std::uint64_t seed, bool keep_maps) {
  TrialResult res;
  res.seed = seed;
  res.scene = scene;
  try {
    auto maps = compute_maps(cfg, ctx, scene, seed);
    if (cfg.trial_mode() == Mode::Multi) run_multi_target(cfg, scene, seed, maps, res);
    else run_single_target(cfg, scene, seed, maps, res);
    res.ok = true;
    if (keep_maps) res.maps = std::move(maps);
  } catch (const DetectionError& e) {
    res.ok = false;
    res.failure = e.what();
    res.receivers.clear();
    res.targets.clear();
  }
  return res;
}

TrialResult run_indexed_trial(const ScenarioConfig& cfg, const PipelineContext& ctx, int index,
                              bool keep_maps) {
  const auto seed = trial_seed(cfg.seed, index);
  auto res = run_trial(cfg, ctx, trial_scene(cfg, seed), seed, keep_maps);
  res.index = index;
  return res;
}

Vector4 measure_fix(const ScenarioConfig& cfg, const PipelineContext& ctx, const Scene& scene,
                    std::uint64_t seed) {
  if (scene.dims() != 2 || scene.targets.size() != 1)
    throw std::invalid_argument("measure_fix: needs a 2D single-target scene");
  TrialResult res;
  auto maps = compute_maps(cfg, ctx, scene, seed);
  run_single_target(cfg, scene, seed, maps, res);
  const auto& t = res.targets.front();
  return {t.est_pos(0), t.est_pos(1), t.est_vel(0), t.est_vel(1)};
}

}  // namespace multiscout
