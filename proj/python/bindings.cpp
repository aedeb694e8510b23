#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "multiscout/harness/runner.hpp"

namespace py = pybind11;
using namespace multiscout;

namespace {

py::array_t<std::complex<double>> to_array(const ComplexVector& v) {
  py::array_t<std::complex<double>> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Scene make_scene(const Vector& tx, const std::vector<Vector>& receivers, const std::vector<Vector>& positions,
                 const std::vector<Vector>& velocities, double clock_bias_s) {
  if (positions.size() != velocities.size()) throw std::invalid_argument("positions and velocities differ in length");
  Scene s;
  s.transmitter_pos = tx;
  s.receivers = receivers;
  for (std::size_t k = 0; k < positions.size(); ++k) s.targets.push_back({positions[k], velocities[k], 4.0});
  s.validate();
  return s;
}

BistaticMeasurementSet make_meas(const std::vector<double>& ranges, const std::vector<double>& radial,
                                 const std::vector<Vector>& receivers, const Vector& tx) {
  BistaticMeasurementSet m;
  m.ranges_m = ranges;
  m.radial_velocities_mps = radial;
  m.receiver_positions = receivers;
  m.transmitter_pos = tx;
  return m;
}

py::dict fix_dict(const PositionFix& f) {
  py::dict d;
  d["pos"] = f.pos;
  d["cost"] = f.residual_cost;
  d["clock_bias_s"] = f.clock_bias_s ? py::cast(*f.clock_bias_s) : py::none();
  d["converged"] = f.converged;
  d["iterations"] = f.iterations;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core bindings of the multistatic sensing simulator";

  py::register_exception<DetectionError>(m, "DetectionError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<WaveformConfig>(m, "WaveformConfig")
      .def(py::init<>())
      .def_readwrite("carrier_freq_hz", &WaveformConfig::carrier_freq_hz)
      .def_readwrite("subcarrier_spacing_hz", &WaveformConfig::subcarrier_spacing_hz)
      .def_readwrite("fft_len", &WaveformConfig::fft_len)
      .def_readwrite("cp_first_len", &WaveformConfig::cp_first_len)
      .def_readwrite("cp_rest_len", &WaveformConfig::cp_rest_len)
      .def_readwrite("symbols_per_slot", &WaveformConfig::symbols_per_slot)
      .def_readwrite("num_symbols", &WaveformConfig::num_symbols)
      .def_readwrite("guard_tones", &WaveformConfig::guard_tones)
      .def_readwrite("dc_null", &WaveformConfig::dc_null)
      .def_readwrite("gold_seed_a", &WaveformConfig::gold_seed_a)
      .def_readwrite("gold_seed_b", &WaveformConfig::gold_seed_b)
      .def_property_readonly("sample_rate_hz", &WaveformConfig::sample_rate_hz)
      .def_property_readonly("active_tones", &WaveformConfig::active_tones)
      .def_property_readonly("frame_length", &WaveformConfig::frame_length)
      .def_static("uniform_cp", &WaveformConfig::uniform_cp);

  m.def("generate_frame", [](const WaveformConfig& cfg) { return to_array(generate_frame(cfg).samples); },
        py::arg("config") = WaveformConfig{});

  m.def("bistatic_range", &bistatic_range, py::arg("p"), py::arg("t"), py::arg("r"));
  m.def("bistatic_radial_velocity", &bistatic_radial_velocity, py::arg("p"), py::arg("v"), py::arg("t"),
        py::arg("r"));

  m.def(
      "synthesize_capture",
      [](const WaveformConfig& cfg, const Vector& tx, const std::vector<Vector>& receivers,
         const std::vector<Vector>& positions, const std::vector<Vector>& velocities, int receiver,
         std::uint64_t seed, bool add_noise, double clock_bias_s) {
        const auto frame = generate_frame(cfg);
        SynthesisOptions opts;
        opts.seed = seed;
        opts.add_noise = add_noise;
        const auto scene = make_scene(tx, receivers, positions, velocities, clock_bias_s);
        return to_array(synthesize_capture(frame, scene, receiver, LinkBudget{}, opts).samples);
      },
      py::arg("config"), py::arg("transmitter"), py::arg("receivers"), py::arg("positions"),
      py::arg("velocities"), py::arg("receiver"), py::arg("seed") = 0, py::arg("add_noise") = true,
      py::arg("clock_bias_s") = 0.0);

  m.def(
      "compute_caf",
      [](py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast> capture,
         const WaveformConfig& cfg, int delay_bins, double span_hz, int points) {
        const auto frame = generate_frame(cfg);
        ReceiverCapture cap;
        cap.samples.assign(capture.data(), capture.data() + capture.size());
        cap.sample_rate_hz = frame.sample_rate_hz;
        const auto map = compute_caf(cap, frame, delay_bins, DopplerGrid{span_hz, points}, CafOptions{});
        const auto peak = detect_single(map);
        py::dict d;
        d["caf"] = Eigen::MatrixXcd(map.caf);
        d["doppler_hz"] = map.doppler_grid.values();
        d["delay_bin_m"] = map.delay_bin_m;
        d["peak_range_m"] = peak.bistatic_range_m;
        d["peak_doppler_hz"] = peak.doppler_hz_refined;
        d["peak_radial_velocity_mps"] = peak.radial_velocity_mps;
        return d;
      },
      py::arg("capture"), py::arg("config"), py::arg("delay_bins"), py::arg("span_hz") = 400.0,
      py::arg("points") = 401);

  m.def(
      "trilaterate",
      [](const std::vector<double>& ranges, const std::vector<Vector>& receivers, const Vector& tx,
         bool estimate_bias, std::uint64_t seed) {
        SolverSettings s;
        s.seed = seed;
        return fix_dict(trilaterate(make_meas(ranges, {}, receivers, tx), s, estimate_bias));
      },
      py::arg("ranges"), py::arg("receivers"), py::arg("transmitter"), py::arg("estimate_bias") = false,
      py::arg("seed") = 0);

  m.def(
      "estimate_velocity",
      [](const Vector& pos, const std::vector<double>& radial, const std::vector<Vector>& receivers,
         const Vector& tx, double ridge_eps) {
        PositionFix fix;
        fix.pos = pos;
        std::vector<double> ranges(radial.size(), 0.0);
        const auto v = estimate_velocity(fix, make_meas(ranges, radial, receivers, tx), ridge_eps);
        py::dict d;
        d["vel"] = v.vel;
        d["speed_mps"] = v.speed_mps;
        d["heading_deg"] = v.heading_deg;
        return d;
      },
      py::arg("pos"), py::arg("radial_velocities"), py::arg("receivers"), py::arg("transmitter"),
      py::arg("ridge_eps") = 1e-3);

  m.def(
      "associate",
      [](const std::vector<std::vector<double>>& range_lists, const std::vector<Vector>& receivers,
         const Vector& tx, std::uint64_t seed) {
        AssociationSettings s;
        s.solver.seed = seed;
        const auto res = associate_targets(range_lists, AssociationContext{tx, receivers, false}, s);
        py::list table;
        for (const auto& h : res.table) table.append(py::make_tuple(h.permutations, h.total_cost));
        py::list fixes;
        for (const auto& f : res.best.fixes) fixes.append(fix_dict(f));
        py::dict d;
        d["best"] = res.best.permutations;
        d["best_cost"] = res.best.total_cost;
        d["fixes"] = fixes;
        d["table"] = table;
        d["num_tied"] = res.num_tied;
        d["ambiguous"] = res.ambiguous;
        return d;
      },
      py::arg("range_lists"), py::arg("receivers"), py::arg("transmitter"), py::arg("seed") = 0);

  m.def(
      "track",
      [](const Eigen::MatrixXd& z, const std::string& filter) {
        if (z.cols() != 4) throw std::invalid_argument("measurements must be N x 4");
        FilterKind kind;
        if (filter == "kf") kind = FilterKind::Kf;
        else if (filter == "ekf") kind = FilterKind::Ekf;
        else throw std::invalid_argument("filter must be 'kf' or 'ekf'");
        std::vector<Vector4> meas;
        for (Eigen::Index i = 0; i < z.rows(); ++i) meas.push_back(z.row(i).transpose());
        const auto res = track_sequence(meas, kind, NoiseModel{});
        Eigen::MatrixXd out(z.rows(), 4);
        for (Eigen::Index i = 0; i < z.rows(); ++i) out.row(i) = res.estimates[static_cast<std::size_t>(i)].transpose();
        return out;
      },
      py::arg("measurements"), py::arg("filter") = "kf");

  m.def("default_config_json", [](const std::string& mode) { return to_json(default_config(parse_mode(mode))).dump(); },
        py::arg("mode") = "single");

  m.def(
      "run_json",
      [](const std::string& config, const std::string& out_dir) {
        auto cfg = config_from_json(nlohmann::json::parse(config));
        py::gil_scoped_release release;
        if (out_dir.empty()) return report_json(run_experiment(cfg)).dump();
        cfg.output_dir = out_dir;
        return report_json(run_and_write(cfg).report).dump();
      },
      py::arg("config"), py::arg("out_dir") = "");
}
