#include "multiscout/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace multiscout {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vec_from(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(where, "expected an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Vector polar_velocity(double speed, double heading_deg) {
  return Vector{{speed * std::cos(deg2rad(heading_deg)), speed * std::sin(deg2rad(heading_deg))}};
}

// Reads typed fields out of one JSON object and rejects keys it never saw.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(where_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(path(key), e.what());
    }
  }

  void get_vector(const char* key, Vector& out) {
    seen_.insert(key);
    if (j_.contains(key)) out = vec_from(j_.at(key), path(key));
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail(where_, "unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string amplitude_name(AmplitudeModel m) { return m == AmplitudeModel::Unit ? "unit" : "radar_equation"; }

AmplitudeModel parse_amplitude(const std::string& s) {
  if (s == "unit") return AmplitudeModel::Unit;
  if (s == "radar_equation") return AmplitudeModel::RadarEquation;
  throw ConfigError("synthesis.amplitude: expected 'unit' or 'radar_equation', got '" + s + "'");
}

json motion_json(const MotionProfile& m) {
  return {{"kind", m.kind == MotionKind::Linear ? "linear" : "circular"},
          {"nominal_speed_mps", m.nominal_speed_mps},
          {"speed_jitter_frac", m.speed_jitter_frac},
          {"turn_rate_deg_s", rad2deg(m.turn_rate_rad_s)},
          {"start_pos", vec_json(m.start_pos)},
          {"start_heading_deg", rad2deg(m.start_heading_rad)},
          {"num_steps", m.num_steps},
          {"dt_s", m.dt_s}};
}

void read_motion(const json& j, const std::string& where, MotionProfile& m) {
  ObjectReader r(j, where);
  std::string kind = m.kind == MotionKind::Linear ? "linear" : "circular";
  r.get("kind", kind);
  if (kind == "linear") m.kind = MotionKind::Linear;
  else if (kind == "circular") m.kind = MotionKind::Circular;
  else fail(r.path("kind"), "expected 'linear' or 'circular'");
  r.get("nominal_speed_mps", m.nominal_speed_mps);
  r.get("speed_jitter_frac", m.speed_jitter_frac);
  double turn = rad2deg(m.turn_rate_rad_s);
  r.get("turn_rate_deg_s", turn);
  m.turn_rate_rad_s = deg2rad(turn);
  Vector start = m.start_pos;
  r.get_vector("start_pos", start);
  if (start.size() != 2) fail(r.path("start_pos"), "expected 2 coordinates");
  m.start_pos = start;
  double heading = rad2deg(m.start_heading_rad);
  r.get("start_heading_deg", heading);
  m.start_heading_rad = deg2rad(heading);
  r.get("num_steps", m.num_steps);
  r.get("dt_s", m.dt_s);
  r.finish();
}

json diag_json(const Matrix4& m) { return {m(0, 0), m(1, 1), m(2, 2), m(3, 3)}; }

Matrix4 diag_from(const json& j, const std::string& where) {
  const Vector v = vec_from(j, where);
  if (v.size() != 4) fail(where, "expected the 4 diagonal entries");
  return Vector4(v(0), v(1), v(2), v(3)).asDiagonal();
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Single: return "single";
    case Mode::Bias: return "bias";
    case Mode::ThreeD: return "threed";
    case Mode::Multi: return "multi";
    case Mode::MonteCarlo: return "montecarlo";
    case Mode::Track: return "track";
  }
  return "single";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::Single, Mode::Bias, Mode::ThreeD, Mode::Multi, Mode::MonteCarlo, Mode::Track})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown mode '" + name + "' (single|bias|threed|multi|montecarlo|track)");
}

Scene triangle_scene() {
  Scene s;
  s.receivers = {Vector{{0.0, 0.0}}, Vector{{500.0, 0.0}}, Vector{{250.0, 433.0}}};
  s.transmitter_pos = (s.receivers[0] + s.receivers[1] + s.receivers[2]) / 3.0;
  return s;
}

Scene four_receiver_scene() {
  Scene s = triangle_scene();
  s.receivers.push_back(Vector{{0.0, 500.0}});
  return s;
}

Scene tetrahedron_scene() {
  Scene s;
  s.receivers = {Vector{{0.0, 0.0, 0.0}}, Vector{{500.0, 0.0, 0.0}}, Vector{{0.0, 500.0, 0.0}},
                 Vector{{0.0, 0.0, 500.0}}};
  s.transmitter_pos = Vector{{125.0, 125.0, 125.0}};
  return s;
}

int ScenarioConfig::num_targets() const {
  return target_source == TargetSource::Random ? random.count : static_cast<int>(scene.targets.size());
}

ScenarioConfig montecarlo_config(Mode base) {
  if (base == Mode::MonteCarlo || base == Mode::Track)
    throw ConfigError("montecarlo.base must be single, bias, threed or multi");
  ScenarioConfig c = default_config(base);
  c.mode = Mode::MonteCarlo;
  c.montecarlo_base = base;
  c.target_source = TargetSource::Random;
  c.scene.targets.clear();
  c.trials = 100;
  return c;
}

ScenarioConfig default_config(Mode mode) {
  ScenarioConfig c;
  c.mode = mode;
  const TargetState reference_target{Vector{{67.18, 423.72}}, Vector{{-4.479, -23.751}}, 4.0};
  switch (mode) {
    case Mode::Single:
      c.scene = triangle_scene();
      c.scene.targets = {reference_target};
      break;
    case Mode::Bias:
      c.scene = four_receiver_scene();
      c.scene.targets = {reference_target};
      break;
    case Mode::ThreeD:
      c.scene = tetrahedron_scene();
      c.scene.targets = {{Vector{{67.18, 423.72, 381.89}}, Vector{{-13.4820, -7.5445, -18.5860}}, 4.0}};
      c.random.area_lo = Vector::Zero(3);
      c.random.area_hi = Vector::Constant(3, 500.0);
      break;
    case Mode::Multi:
      c.scene = triangle_scene();
      c.scene.targets = {{Vector{{46.93, 14.17}}, polar_velocity(23.97, 150.91), 4.0},
                         {Vector{{417.88, 216.38}}, polar_velocity(25.39, -113.32), 4.0}};
      c.random.count = 2;
      break;
    case Mode::MonteCarlo:
      return montecarlo_config(Mode::Single);
    case Mode::Track:
      c.scene = triangle_scene();
      c.doppler = DopplerGrid::tracking();
      c.tracking.linear.kind = MotionKind::Linear;
      c.tracking.linear.start_pos = {20.0, 120.0};
      c.tracking.linear.start_heading_rad = deg2rad(20.0);
      c.tracking.circular.kind = MotionKind::Circular;
      c.tracking.circular.start_pos = {250.0, 60.0};
      c.tracking.circular.start_heading_rad = 0.0;
      break;
  }
  return c;
}

void ScenarioConfig::validate() const {
  try {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (mode == Mode::MonteCarlo && (montecarlo_base == Mode::MonteCarlo || montecarlo_base == Mode::Track))
      throw ConfigError("montecarlo.base must be single, bias, threed or multi");
    waveform.validate();
    doppler.validate();
    solver.validate();
    scene.validate();
    if (delay_bins < 0 || delay_margin_bins < 0) throw ConfigError("caf.delay_bins and caf.margin_bins must be >= 0");
    if (!(detection_rho > 1.0)) throw ConfigError("detection.rho must exceed 1");
    if (link.noise_var < 0.0) throw ConfigError("link.noise_var must be >= 0");

    const Mode tm = trial_mode();
    const int dims = scene.dims();
    const int m = static_cast<int>(scene.receivers.size());
    if (tm == Mode::ThreeD && dims != 3) throw ConfigError("threed mode needs a 3D scene");
    if (tm != Mode::ThreeD && dims != 2) throw ConfigError(to_string(tm) + " mode needs a 2D scene");
    const int need = required_receivers(dims, tm == Mode::Bias);
    if (m < need)
      throw ConfigError(to_string(tm) + " mode needs at least " + std::to_string(need) + " receivers, got " +
                        std::to_string(m));
    if (tm == Mode::Track) {
      tracking.linear.validate();
      tracking.circular.validate();
      tracking.noise.validate();
      return;
    }
    if (target_source == TargetSource::Random) {
      if (random.count < 1) throw ConfigError("targets.count must be >= 1");
      if (random.area_lo.size() != dims || random.area_hi.size() != dims)
        throw ConfigError("targets.area_lo/area_hi must match the scene dimension");
      if ((random.area_hi - random.area_lo).minCoeff() <= 0.0) throw ConfigError("targets: empty area box");
      if (!(random.speed_min_mps >= 0.0) || random.speed_max_mps < random.speed_min_mps)
        throw ConfigError("targets: need 0 <= speed_min_mps <= speed_max_mps");
    } else if (scene.targets.empty()) {
      throw ConfigError("scene has no targets");
    }
    const int k = num_targets();
    if (tm == Mode::Multi && k < 1) throw ConfigError("multi mode needs at least one target");
    if (tm != Mode::Multi && k != 1) throw ConfigError(to_string(tm) + " mode takes exactly one target");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json to_json(const ScenarioConfig& c) {
  json targets = json::array();
  for (const auto& t : c.scene.targets)
    targets.push_back({{"pos", vec_json(t.pos)}, {"vel", vec_json(t.vel)}, {"rcs_m2", t.rcs_m2}});
  json receivers = json::array();
  for (const auto& r : c.scene.receivers) receivers.push_back(vec_json(r));
  const auto& w = c.waveform;
  const auto& s = c.solver;
  return {
      {"mode", to_string(c.mode)},
      {"seed", c.seed},
      {"trials", c.trials},
      {"threads", c.threads},
      {"output_dir", c.output_dir.string()},
      {"waveform",
       {{"carrier_freq_hz", w.carrier_freq_hz},
        {"subcarrier_spacing_hz", w.subcarrier_spacing_hz},
        {"fft_len", w.fft_len},
        {"cp_first_len", w.cp_first_len},
        {"cp_rest_len", w.cp_rest_len},
        {"symbols_per_slot", w.symbols_per_slot},
        {"num_symbols", w.num_symbols},
        {"guard_tones", w.guard_tones},
        {"dc_null", w.dc_null},
        {"gold", {{"register_len", w.gold.register_len}, {"taps_a", w.gold.taps_a}, {"taps_b", w.gold.taps_b}}},
        {"gold_seed_a", w.gold_seed_a},
        {"gold_seed_b", w.gold_seed_b}}},
      {"link",
       {{"tx_power_dbm", c.link.tx_power_dbm},
        {"tx_gain_dbi", c.link.tx_gain_dbi},
        {"rx_gain_dbi", c.link.rx_gain_dbi},
        {"noise_var", c.link.noise_var}}},
      {"synthesis",
       {{"amplitude", amplitude_name(c.amplitude)},
        {"include_direct_path", c.include_direct_path},
        {"add_noise", c.add_noise},
        {"direct_path_gain_db", c.direct_path_gain_db}}},
      {"direct_path_removal",
       {{"enabled", c.remove_direct_path},
        {"search_lags", c.direct_path.search_lags},
        {"min_lag", c.direct_path.min_lag},
        {"max_lag", c.direct_path.max_lag},
        {"threshold_ratio", c.direct_path.threshold_ratio}}},
      {"scene",
       {{"transmitter", vec_json(c.scene.transmitter_pos)},
        {"receivers", receivers},
        {"clock_bias_s", c.scene.clock_bias_s},
        {"targets", targets}}},
      {"targets",
       {{"source", c.target_source == TargetSource::Fixed ? "fixed" : "random"},
        {"count", c.random.count},
        {"area_lo", vec_json(c.random.area_lo)},
        {"area_hi", vec_json(c.random.area_hi)},
        {"speed_min_mps", c.random.speed_min_mps},
        {"speed_max_mps", c.random.speed_max_mps},
        {"max_elevation_deg", c.random.max_elevation_deg},
        {"rcs_m2", c.random.rcs_m2},
        {"min_clearance_m", c.random.min_clearance_m},
        {"min_separation_m", c.random.min_separation_m}}},
      {"doppler", {{"span_hz", c.doppler.span_hz}, {"points", c.doppler.points}}},
      {"caf", {{"delay_bins", c.delay_bins}, {"margin_bins", c.delay_margin_bins}, {"block_len", c.caf_block_len}}},
      {"detection", {{"rho", c.detection_rho}, {"min_peak_to_mean", c.min_peak_to_mean}}},
      {"solver",
       {{"restarts", s.restarts},
        {"max_iters", s.max_iters},
        {"step_tol", s.step_tol},
        {"grad_tol", s.grad_tol},
        {"mu_init", s.mu_init},
        {"mu_up", s.mu_up},
        {"mu_down", s.mu_down},
        {"mu_max", s.mu_max},
        {"ridge_eps", s.ridge_eps},
        {"init_box_margin_m", s.init_box_margin_m}}},
      {"association",
       {{"scoring_restarts", c.association.scoring_restarts},
        {"max_hypotheses", c.association.max_hypotheses},
        {"tie_rel_tol", c.association.tie_rel_tol}}},
      {"montecarlo", {{"base", to_string(c.montecarlo_base)}}},
      {"tracking",
       {{"full_chain", c.tracking.full_chain},
        {"Q_diag", diag_json(c.tracking.noise.Q)},
        {"R_diag", diag_json(c.tracking.noise.R)},
        {"dt_s", c.tracking.noise.dt_s},
        {"linear", motion_json(c.tracking.linear)},
        {"circular", motion_json(c.tracking.circular)}}},
      {"outputs", {{"caf_csv", c.outputs.caf_csv}, {"heatmap_pgm", c.outputs.heatmap_pgm}}},
  };
}

ScenarioConfig config_from_json(const nlohmann::json& j, Mode fallback_mode) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  Mode mode = fallback_mode;
  if (j.contains("mode")) {
    if (!j.at("mode").is_string()) throw ConfigError("config.mode: expected a string");
    mode = parse_mode(j.at("mode").get<std::string>());
  }
  ScenarioConfig c = default_config(mode);
  if (mode == Mode::MonteCarlo && j.contains("montecarlo") && j.at("montecarlo").is_object() &&
      j.at("montecarlo").contains("base")) {
    const auto& b = j.at("montecarlo").at("base");
    if (!b.is_string()) throw ConfigError("montecarlo.base: expected a string");
    c = montecarlo_config(parse_mode(b.get<std::string>()));
  }
  ObjectReader root(j, "config");
  std::string mode_name = to_string(mode);
  root.get("mode", mode_name);
  root.get("seed", c.seed);
  root.get("trials", c.trials);
  root.get("threads", c.threads);
  std::string out = c.output_dir.string();
  root.get("output_dir", out);
  c.output_dir = out;

  if (const auto* w = root.child("waveform")) {
    ObjectReader r(*w, "waveform");
    auto& wf = c.waveform;
    r.get("carrier_freq_hz", wf.carrier_freq_hz);
    r.get("subcarrier_spacing_hz", wf.subcarrier_spacing_hz);
    r.get("fft_len", wf.fft_len);
    r.get("cp_first_len", wf.cp_first_len);
    r.get("cp_rest_len", wf.cp_rest_len);
    r.get("symbols_per_slot", wf.symbols_per_slot);
    r.get("num_symbols", wf.num_symbols);
    r.get("guard_tones", wf.guard_tones);
    r.get("dc_null", wf.dc_null);
    if (const auto* g = r.child("gold")) {
      ObjectReader gr(*g, "waveform.gold");
      gr.get("register_len", wf.gold.register_len);
      gr.get("taps_a", wf.gold.taps_a);
      gr.get("taps_b", wf.gold.taps_b);
      gr.finish();
    }
    r.get("gold_seed_a", wf.gold_seed_a);
    r.get("gold_seed_b", wf.gold_seed_b);
    r.finish();
  }
  if (const auto* l = root.child("link")) {
    ObjectReader r(*l, "link");
    r.get("tx_power_dbm", c.link.tx_power_dbm);
    r.get("tx_gain_dbi", c.link.tx_gain_dbi);
    r.get("rx_gain_dbi", c.link.rx_gain_dbi);
    r.get("noise_var", c.link.noise_var);
    r.finish();
  }
  if (const auto* s = root.child("synthesis")) {
    ObjectReader r(*s, "synthesis");
    std::string amp = amplitude_name(c.amplitude);
    r.get("amplitude", amp);
    c.amplitude = parse_amplitude(amp);
    r.get("include_direct_path", c.include_direct_path);
    r.get("add_noise", c.add_noise);
    r.get("direct_path_gain_db", c.direct_path_gain_db);
    r.finish();
  }
  if (const auto* d = root.child("direct_path_removal")) {
    ObjectReader r(*d, "direct_path_removal");
    r.get("enabled", c.remove_direct_path);
    r.get("search_lags", c.direct_path.search_lags);
    r.get("min_lag", c.direct_path.min_lag);
    r.get("max_lag", c.direct_path.max_lag);
    r.get("threshold_ratio", c.direct_path.threshold_ratio);
    r.finish();
  }
  if (const auto* s = root.child("scene")) {
    ObjectReader r(*s, "scene");
    r.get_vector("transmitter", c.scene.transmitter_pos);
    if (const auto* rx = r.child("receivers")) {
      if (!rx->is_array()) fail("scene.receivers", "expected an array");
      c.scene.receivers.clear();
      for (std::size_t i = 0; i < rx->size(); ++i)
        c.scene.receivers.push_back(vec_from((*rx)[i], "scene.receivers[" + std::to_string(i) + "]"));
    }
    r.get("clock_bias_s", c.scene.clock_bias_s);
    if (const auto* tg = r.child("targets")) {
      if (!tg->is_array()) fail("scene.targets", "expected an array");
      c.scene.targets.clear();
      for (std::size_t i = 0; i < tg->size(); ++i) {
        const std::string where = "scene.targets[" + std::to_string(i) + "]";
        ObjectReader tr((*tg)[i], where);
        TargetState t;
        tr.get_vector("pos", t.pos);
        tr.get_vector("vel", t.vel);
        tr.get("rcs_m2", t.rcs_m2);
        tr.finish();
        if (t.pos.size() == 0 || t.vel.size() == 0) fail(where, "pos and vel are required");
        c.scene.targets.push_back(t);
      }
    }
    r.finish();
  }
  if (const auto* t = root.child("targets")) {
    ObjectReader r(*t, "targets");
    std::string src = c.target_source == TargetSource::Fixed ? "fixed" : "random";
    r.get("source", src);
    if (src == "fixed") c.target_source = TargetSource::Fixed;
    else if (src == "random") c.target_source = TargetSource::Random;
    else fail("targets.source", "expected 'fixed' or 'random'");
    r.get("count", c.random.count);
    r.get_vector("area_lo", c.random.area_lo);
    r.get_vector("area_hi", c.random.area_hi);
    r.get("speed_min_mps", c.random.speed_min_mps);
    r.get("speed_max_mps", c.random.speed_max_mps);
    r.get("max_elevation_deg", c.random.max_elevation_deg);
    r.get("rcs_m2", c.random.rcs_m2);
    r.get("min_clearance_m", c.random.min_clearance_m);
    r.get("min_separation_m", c.random.min_separation_m);
    r.finish();
  }
  if (const auto* d = root.child("doppler")) {
    ObjectReader r(*d, "doppler");
    r.get("span_hz", c.doppler.span_hz);
    r.get("points", c.doppler.points);
    r.finish();
  }
  if (const auto* d = root.child("caf")) {
    ObjectReader r(*d, "caf");
    r.get("delay_bins", c.delay_bins);
    r.get("margin_bins", c.delay_margin_bins);
    r.get("block_len", c.caf_block_len);
    r.finish();
  }
  if (const auto* d = root.child("detection")) {
    ObjectReader r(*d, "detection");
    r.get("rho", c.detection_rho);
    r.get("min_peak_to_mean", c.min_peak_to_mean);
    r.finish();
  }
  if (const auto* s = root.child("solver")) {
    ObjectReader r(*s, "solver");
    auto& sv = c.solver;
    r.get("restarts", sv.restarts);
    r.get("max_iters", sv.max_iters);
    r.get("step_tol", sv.step_tol);
    r.get("grad_tol", sv.grad_tol);
    r.get("mu_init", sv.mu_init);
    r.get("mu_up", sv.mu_up);
    r.get("mu_down", sv.mu_down);
    r.get("mu_max", sv.mu_max);
    r.get("ridge_eps", sv.ridge_eps);
    r.get("init_box_margin_m", sv.init_box_margin_m);
    r.finish();
  }
  if (const auto* a = root.child("association")) {
    ObjectReader r(*a, "association");
    r.get("scoring_restarts", c.association.scoring_restarts);
    r.get("max_hypotheses", c.association.max_hypotheses);
    r.get("tie_rel_tol", c.association.tie_rel_tol);
    r.finish();
  }
  if (const auto* m = root.child("montecarlo")) {
    ObjectReader r(*m, "montecarlo");
    std::string base = to_string(c.montecarlo_base);
    r.get("base", base);
    c.montecarlo_base = parse_mode(base);
    r.finish();
  }
  if (const auto* t = root.child("tracking")) {
    ObjectReader r(*t, "tracking");
    r.get("full_chain", c.tracking.full_chain);
    if (const auto* q = r.child("Q_diag")) c.tracking.noise.Q = diag_from(*q, "tracking.Q_diag");
    if (const auto* rr = r.child("R_diag")) c.tracking.noise.R = diag_from(*rr, "tracking.R_diag");
    r.get("dt_s", c.tracking.noise.dt_s);
    if (const auto* l = r.child("linear")) read_motion(*l, "tracking.linear", c.tracking.linear);
    if (const auto* cc = r.child("circular")) read_motion(*cc, "tracking.circular", c.tracking.circular);
    r.finish();
  }
  if (const auto* o = root.child("outputs")) {
    ObjectReader r(*o, "outputs");
    r.get("caf_csv", c.outputs.caf_csv);
    r.get("heatmap_pgm", c.outputs.heatmap_pgm);
    r.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path, Mode fallback_mode) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, fallback_mode);
}

}  // namespace multiscout
