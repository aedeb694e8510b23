#include "multiscout/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace multiscout {
namespace {

using nlohmann::json;

std::string fmt(double v, int prec) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  std::string s = buf;
  // Avoid "-0.00" style output.
  bool all_zero = true;
  for (char ch : s)
    if (ch != '-' && ch != '0' && ch != '.') all_zero = false;
  if (all_zero && !s.empty() && s[0] == '-') s.erase(0, 1);
  return s;
}

std::string vec_str(const Vector& v, int prec) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v(i), prec);
  return s + "]";
}

std::string tuple_str(const PermutationTuple& t) {
  std::string s = "(";
  for (std::size_t m = 0; m < t.size(); ++m) {
    s += m ? ",(" : "(";
    for (std::size_t k = 0; k < t[m].size(); ++k) s += (k ? "," : "") + std::to_string(t[m][k]);
    s += ")";
  }
  return s + ")";
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json metrics_json(const TrialMetrics& m) {
  json j = {{"trilateration_cost", m.trilateration_cost},
            {"rms_bistatic_range_error_m", m.rms_range_error_m},
            {"rms_bistatic_range_error_pct", m.rms_range_error_pct},
            {"truth_range_rms_m", m.truth_range_rms_m},
            {"abs_speed_error_mps", m.speed_error_mps},
            {"abs_speed_error_pct", m.speed_error_pct},
            {"abs_angle_error_deg", m.angle_error_deg},
            {"abs_angle_error_pct", m.angle_error_pct},
            {"position_error_m", m.position_error_m},
            {"mean_true_bistatic_range_m", m.mean_true_range_m},
            {"mean_true_speed_mps", m.mean_true_speed_mps}};
  if (m.bias_true_s) j["clock_bias_true_s"] = *m.bias_true_s;
  if (m.bias_est_s) j["clock_bias_est_s"] = *m.bias_est_s;
  return j;
}

json track_json(const TrackResult& r) {
  return {{"measurement_error_total_m", r.measurement_error_total},
          {"filter_error_total_m", r.filter_error_total},
          {"min_cov_eigenvalue", r.min_cov_eigenvalue}};
}

void table_header(std::ostringstream& o, std::initializer_list<const char*> cols) {
  o << '|';
  for (const char* c : cols) o << ' ' << c << " |";
  o << "\n|";
  for (std::size_t i = 0; i < cols.size(); ++i) o << "---|";
  o << '\n';
}

void single_trial_tables(std::ostringstream& o, const TrialResult& t, Mode trial_mode) {
  const bool multi = trial_mode == Mode::Multi;
  o << "## Per-receiver bistatic estimates\n\n";
  if (multi) table_header(o, {"Receiver", "Target", "B_true (m)", "B_est (m)", "v_true (m/s)", "v_est (m/s)"});
  else table_header(o, {"Receiver", "B_true (m)", "B_est (m)", "v_true (m/s)", "v_est (m/s)"});
  for (const auto& r : t.receivers) {
    o << "| " << r.receiver + 1 << " | ";
    if (multi) o << r.truth_target + 1 << " | ";
    o << fmt(r.true_range_m, 2) << " | " << fmt(r.est_range_m, 2) << " | " << fmt(r.true_radial_mps, 2) << " | "
      << fmt(r.est_radial_mps, 2) << " |\n";
  }

  o << "\n## Target position and velocity\n\n";
  table_header(o, {"Target", "Parameter", "True", "Estimated"});
  for (const auto& te : t.targets) {
    const std::string id = std::to_string(te.truth_target + 1);
    o << "| " << id << " | Position (m) | " << vec_str(te.true_pos, 2) << " | " << vec_str(te.est_pos, 2) << " |\n";
    o << "| " << id << " | Speed (m/s) | " << fmt(te.true_speed_mps, 2) << " | " << fmt(te.est_speed_mps, 2) << " |\n";
    o << "| " << id << " | Angle (deg) | " << fmt(te.true_heading_deg, 2) << " | " << fmt(te.est_heading_deg, 2)
      << " |\n";
  }

  const auto& m = t.metrics;
  o << "\n## Performance\n\n";
  table_header(o, {"Metric", "Value"});
  o << "| Trilateration cost | " << fmt(m.trilateration_cost, 3) << " |\n";
  o << "| RMS bistatic-range error | " << fmt(m.rms_range_error_m, 3) << " m (" << fmt(m.rms_range_error_pct, 3)
    << "% of mean bistatic range) |\n";
  o << "| Absolute error in speed | " << fmt(m.speed_error_mps, 3) << " m/s (" << fmt(m.speed_error_pct, 3)
    << "% of true speed) |\n";
  o << "| Absolute error in angle | " << fmt(m.angle_error_deg, 3) << " deg (" << fmt(m.angle_error_pct, 3)
    << "% of full circle) |\n";
  o << "| Position error | " << fmt(m.position_error_m, 2) << " m |\n";
  if (m.bias_est_s)
    o << "| Clock bias (true / estimated) | " << fmt(m.bias_true_s.value_or(0.0) * 1e9, 2) << " ns / "
      << fmt(*m.bias_est_s * 1e9, 2) << " ns |\n";

  if (t.association) {
    const auto& a = *t.association;
    o << "\n## Association hypotheses\n\n";
    table_header(o, {"Candidate target pairs", "Trilateration cost", "Selected"});
    for (std::size_t i = 0; i < a.table.size(); ++i)
      o << "| " << tuple_str(a.table[i].permutations) << " | " << fmt(a.table[i].total_cost, 2) << " | "
        << (i == a.best_index ? "yes" : "") << " |\n";
    o << "\nTied minima: " << a.num_tied << (a.ambiguous ? " (ambiguous)" : "")
      << ". Pairing matches truth: " << (t.association_correct ? "yes" : "no") << ".\n";
  }
}

void aggregate_table(std::ostringstream& o, const AggregateMetrics& a, Mode trial_mode) {
  o << "## Averaged performance over " << a.succeeded << " of " << a.trials << " trials\n\n";
  table_header(o, {"Metric", "Value"});
  o << "| Trilateration cost | " << fmt(a.trilateration_cost, 3) << " |\n";
  o << "| RMS bistatic-range error | " << fmt(a.rms_range_error_m, 3) << " m (" << fmt(a.rms_range_error_pct, 3)
    << "% of mean bistatic range) |\n";
  o << "| Absolute error in speed | " << fmt(a.speed_error_mps, 3) << " m/s (" << fmt(a.speed_error_pct, 3)
    << "% of true speed) |\n";
  o << "| Absolute error in angle | " << fmt(a.angle_error_deg, 3) << " deg (" << fmt(a.angle_error_pct, 3)
    << "% of full circle) |\n";
  o << "| Position error | " << fmt(a.position_error_m, 2) << " m |\n";
  if (trial_mode == Mode::Bias) o << "| Clock bias error | " << fmt(a.bias_error_ns, 2) << " ns |\n";
  if (trial_mode == Mode::Multi)
    o << "| Association accuracy | " << fmt(a.association_accuracy * 100.0, 1) << "% |\n";
  o << "| Failed trials | " << a.failed << " |\n";
}

void track_tables(std::ostringstream& o, const MetricsReport& r) {
  const auto& s = r.track_summary;
  o << "## Tracking errors (median total over " << s.succeeded << " of " << s.runs << " runs)\n\n";
  table_header(o, {"Motion", "Measurement (m)", "Standard KF (m)", "EKF (m)"});
  o << "| Linear | " << fmt(s.median_meas_linear, 2) << " | " << fmt(s.median_kf_linear, 2) << " | "
    << fmt(s.median_ekf_linear, 2) << " |\n";
  o << "| Circular | " << fmt(s.median_meas_circular, 2) << " | " << fmt(s.median_kf_circular, 2) << " | "
    << fmt(s.median_ekf_circular, 2) << " |\n";
  if (r.tracks.size() > 1) {
    o << "\n## Per-run totals\n\n";
    table_header(o, {"Run", "Lin. meas", "Lin. KF", "Lin. EKF", "Circ. meas", "Circ. KF", "Circ. EKF"});
    for (const auto& t : r.tracks) {
      if (!t.ok) {
        o << "| " << t.index << " | failed | | | | | |\n";
        continue;
      }
      o << "| " << t.index << " | " << fmt(t.kf_linear.measurement_error_total, 2) << " | "
        << fmt(t.kf_linear.filter_error_total, 2) << " | " << fmt(t.ekf_linear.filter_error_total, 2) << " | "
        << fmt(t.kf_circular.measurement_error_total, 2) << " | " << fmt(t.kf_circular.filter_error_total, 2)
        << " | " << fmt(t.ekf_circular.filter_error_total, 2) << " |\n";
    }
  }
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AggregateMetrics aggregate_trials(const std::vector<TrialResult>& trials, Mode trial_mode) {
  AggregateMetrics a;
  a.trials = static_cast<int>(trials.size());
  for (const auto& t : trials) {
    if (!t.ok) {
      ++a.failed;
      continue;
    }
    ++a.succeeded;
    const auto& m = t.metrics;
    a.trilateration_cost += m.trilateration_cost;
    a.rms_range_error_m += m.rms_range_error_m;
    a.rms_range_error_pct += m.rms_range_error_pct;
    a.truth_range_rms_m += m.truth_range_rms_m;
    a.speed_error_mps += m.speed_error_mps;
    a.speed_error_pct += m.speed_error_pct;
    a.angle_error_deg += m.angle_error_deg;
    a.angle_error_pct += m.angle_error_pct;
    a.position_error_m += m.position_error_m;
    if (m.bias_est_s) a.bias_error_ns += std::abs(*m.bias_est_s - m.bias_true_s.value_or(0.0)) * 1e9;
    if (t.association_correct) ++a.association_correct;
  }
  if (a.succeeded > 0) {
    const double n = a.succeeded;
    for (double* v : {&a.trilateration_cost, &a.rms_range_error_m, &a.rms_range_error_pct, &a.truth_range_rms_m,
                      &a.speed_error_mps, &a.speed_error_pct, &a.angle_error_deg, &a.angle_error_pct,
                      &a.position_error_m, &a.bias_error_ns})
      *v /= n;
    if (trial_mode == Mode::Multi) a.association_accuracy = a.association_correct / n;
  }
  return a;
}

TrackSummary summarize_tracks(const std::vector<TrackRun>& runs) {
  TrackSummary s;
  s.runs = static_cast<int>(runs.size());
  std::vector<double> ml, kl, el, mc, kc, ec;
  s.min_cov_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    if (!r.ok) continue;
    ++s.succeeded;
    ml.push_back(r.kf_linear.measurement_error_total);
    kl.push_back(r.kf_linear.filter_error_total);
    el.push_back(r.ekf_linear.filter_error_total);
    mc.push_back(r.kf_circular.measurement_error_total);
    kc.push_back(r.kf_circular.filter_error_total);
    ec.push_back(r.ekf_circular.filter_error_total);
    for (const auto* t : {&r.kf_linear, &r.ekf_linear, &r.kf_circular, &r.ekf_circular})
      s.min_cov_eigenvalue = std::min(s.min_cov_eigenvalue, t->min_cov_eigenvalue);
  }
  s.median_meas_linear = median(ml);
  s.median_kf_linear = median(kl);
  s.median_ekf_linear = median(el);
  s.median_meas_circular = median(mc);
  s.median_kf_circular = median(kc);
  s.median_ekf_circular = median(ec);
  return s;
}

nlohmann::json report_json(const MetricsReport& r) {
  json j;
  j["mode"] = to_string(r.mode);
  j["trial_mode"] = to_string(r.trial_mode);
  j["seed"] = r.seed;
  if (r.mode == Mode::Track) {
    const auto& s = r.track_summary;
    j["tracking"] = {{"runs", s.runs},
                     {"succeeded", s.succeeded},
                     {"median_measurement_linear_m", s.median_meas_linear},
                     {"median_kf_linear_m", s.median_kf_linear},
                     {"median_ekf_linear_m", s.median_ekf_linear},
                     {"median_measurement_circular_m", s.median_meas_circular},
                     {"median_kf_circular_m", s.median_kf_circular},
                     {"median_ekf_circular_m", s.median_ekf_circular},
                     {"min_cov_eigenvalue", s.min_cov_eigenvalue}};
    json runs = json::array();
    for (const auto& t : r.tracks) {
      json rj = {{"index", t.index}, {"seed", t.seed}, {"ok", t.ok}};
      if (!t.ok) rj["failure"] = t.failure;
      else
        rj.update({{"kf_linear", track_json(t.kf_linear)},
                   {"ekf_linear", track_json(t.ekf_linear)},
                   {"kf_circular", track_json(t.kf_circular)},
                   {"ekf_circular", track_json(t.ekf_circular)}});
      runs.push_back(rj);
    }
    j["runs"] = runs;
    return j;
  }

  const auto& a = r.aggregate;
  j["delay_bins"] = r.delay_bins;
  j["aggregate"] = {{"trials", a.trials},
                    {"succeeded", a.succeeded},
                    {"failed", a.failed},
                    {"trilateration_cost", a.trilateration_cost},
                    {"rms_bistatic_range_error_m", a.rms_range_error_m},
                    {"rms_bistatic_range_error_pct", a.rms_range_error_pct},
                    {"truth_range_rms_m", a.truth_range_rms_m},
                    {"abs_speed_error_mps", a.speed_error_mps},
                    {"abs_speed_error_pct", a.speed_error_pct},
                    {"abs_angle_error_deg", a.angle_error_deg},
                    {"abs_angle_error_pct", a.angle_error_pct},
                    {"position_error_m", a.position_error_m}};
  if (r.trial_mode == Mode::Bias) j["aggregate"]["clock_bias_error_ns"] = a.bias_error_ns;
  if (r.trial_mode == Mode::Multi) {
    j["aggregate"]["association_correct"] = a.association_correct;
    j["aggregate"]["association_accuracy"] = a.association_accuracy;
  }

  json trials = json::array();
  for (const auto& t : r.trials) {
    json tj = {{"index", t.index}, {"seed", t.seed}, {"ok", t.ok}};
    if (!t.ok) {
      tj["failure"] = t.failure;
      trials.push_back(tj);
      continue;
    }
    tj["metrics"] = metrics_json(t.metrics);
    json targets = json::array();
    for (const auto& te : t.targets)
      targets.push_back({{"truth_target", te.truth_target},
                         {"true_pos", vec_json(te.true_pos)},
                         {"est_pos", vec_json(te.est_pos)},
                         {"true_vel", vec_json(te.true_vel)},
                         {"est_vel", vec_json(te.est_vel)},
                         {"est_speed_mps", te.est_speed_mps},
                         {"est_heading_deg", te.est_heading_deg},
                         {"cost", te.cost},
                         {"position_error_m", te.position_error_m}});
    tj["targets"] = targets;
    json rx = json::array();
    for (const auto& re : t.receivers)
      rx.push_back({{"receiver", re.receiver},
                    {"truth_target", re.truth_target},
                    {"delay_bin", re.delay_bin},
                    {"true_range_m", re.true_range_m},
                    {"est_range_m", re.est_range_m},
                    {"true_radial_mps", re.true_radial_mps},
                    {"est_radial_mps", re.est_radial_mps}});
    tj["receivers"] = rx;
    if (t.association) {
      const auto& as = *t.association;
      json hyps = json::array();
      for (const auto& h : as.table) hyps.push_back({{"assignment", tuple_str(h.permutations)}, {"total_cost", h.total_cost}});
      tj["association"] = {{"selected", tuple_str(as.best.permutations)},
                           {"num_tied", as.num_tied},
                           {"ambiguous", as.ambiguous},
                           {"correct", t.association_correct},
                           {"hypotheses", hyps}};
    }
    trials.push_back(tj);
  }
  j["trials"] = trials;
  return j;
}

std::string tables_markdown(const MetricsReport& r) {
  std::ostringstream o;
  o << "# " << to_string(r.mode) << " run, seed " << r.seed << "\n\n";
  if (r.mode == Mode::Track) {
    track_tables(o, r);
    return o.str();
  }
  if (r.trials.size() == 1) {
    const auto& t = r.trials.front();
    if (t.ok) single_trial_tables(o, t, r.trial_mode);
    else o << "Trial failed: " << t.failure << "\n";
  } else {
    aggregate_table(o, r.aggregate, r.trial_mode);
  }
  return o.str();
}

void write_fixes_csv(const MetricsReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_fixes_csv: cannot open " + path.string());
  out << "trial,target,ok,true_x,true_y,true_z,est_x,est_y,est_z,est_vx,est_vy,est_vz,speed_mps,heading_deg,cost,"
         "position_error_m\n";
  out.precision(10);
  auto coord = [](const Vector& v, int i) { return i < v.size() ? v(i) : 0.0; };
  for (const auto& t : r.trials) {
    if (!t.ok) {
      out << t.index << ",,0,,,,,,,,,,,,,\n";
      continue;
    }
    for (const auto& te : t.targets) {
      out << t.index << ',' << te.truth_target << ",1";
      for (int i = 0; i < 3; ++i) out << ',' << coord(te.true_pos, i);
      for (int i = 0; i < 3; ++i) out << ',' << coord(te.est_pos, i);
      for (int i = 0; i < 3; ++i) out << ',' << coord(te.est_vel, i);
      out << ',' << te.est_speed_mps << ',' << te.est_heading_deg << ',' << te.cost << ',' << te.position_error_m
          << '\n';
    }
  }
}

}  // namespace multiscout
