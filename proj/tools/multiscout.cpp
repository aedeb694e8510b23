#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "multiscout/harness/runner.hpp"
#include "multiscout/iq_io.hpp"

using namespace multiscout;

namespace {

struct ModeArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<std::string> base;
  bool print_defaults = false;
  bool quiet = false;
};

ScenarioConfig build_config(Mode mode, const ModeArgs& a) {
  ScenarioConfig cfg;
  if (!a.config.empty()) {
    cfg = load_config(a.config, mode);
    if (cfg.mode != mode) throw ConfigError("config file mode '" + to_string(cfg.mode) + "' does not match '" +
                                            to_string(mode) + "'");
  } else {
    cfg = mode == Mode::MonteCarlo ? montecarlo_config(a.base ? parse_mode(*a.base) : Mode::Single)
                                   : default_config(mode);
  }
  if (a.base && !a.config.empty()) throw ConfigError("--base applies only without --config");
  if (a.seed) cfg.seed = *a.seed;
  if (a.trials) cfg.trials = *a.trials;
  if (a.threads) cfg.threads = *a.threads;
  if (a.out) cfg.output_dir = *a.out;
  cfg.validate();
  return cfg;
}

int run_mode(Mode mode, const ModeArgs& a) {
  const auto cfg = build_config(mode, a);
  if (a.print_defaults) {
    std::cout << to_json(cfg).dump(2) << '\n';
    return 0;
  }
  const auto outcome = run_and_write(cfg);
  if (!a.quiet) std::cout << tables_markdown(outcome.report) << "\nOutputs written to " << outcome.output_path.string() << '\n';
  if (outcome.exit_code != 0) std::cerr << "error: every trial failed detection or association\n";
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multistatic passive sensing simulator"};
  app.require_subcommand(0, 1);
  bool top_defaults = false;
  app.add_flag("--print-defaults", top_defaults, "Print the default single-target configuration and exit");

  const std::vector<std::pair<Mode, const char*>> modes = {
      {Mode::Single, "Single-target positioning"},
      {Mode::Bias, "Four receivers with a common clock bias"},
      {Mode::ThreeD, "Tetrahedron receivers, 3D target"},
      {Mode::Multi, "Two targets with range association"},
      {Mode::MonteCarlo, "Random-target repetition of a base mode"},
      {Mode::Track, "Linear and circular tracks through KF and EKF"}};
  std::vector<ModeArgs> args(modes.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    auto* sub = app.add_subcommand(to_string(modes[i].first), modes[i].second);
    auto& a = args[i];
    sub->add_option("--config", a.config, "JSON scenario file")->check(CLI::ExistingFile);
    sub->add_option("--seed", a.seed, "Master seed");
    sub->add_option("--trials", a.trials, "Number of trials (runs in track mode)");
    sub->add_option("--threads", a.threads, "Worker threads, 0 for all cores");
    sub->add_option("--out", a.out, "Output directory");
    if (modes[i].first == Mode::MonteCarlo)
      sub->add_option("--base", a.base, "Experiment to repeat: single, bias, threed or multi");
    sub->add_flag("--print-defaults", a.print_defaults, "Print the resolved configuration and exit");
    sub->add_flag("-q,--quiet", a.quiet, "Do not print the tables");
    subs.push_back(sub);
  }

  WaveformConfig wf;
  bool uniform_cp = false;
  std::string iq_out;
  auto* wsub = app.add_subcommand("waveform", "Generate one PRS frame as float32 I/Q");
  wsub->add_option("--carrier-freq-hz", wf.carrier_freq_hz, "Carrier frequency")->capture_default_str();
  wsub->add_option("--subcarrier-spacing-hz", wf.subcarrier_spacing_hz, "Subcarrier spacing")->capture_default_str();
  wsub->add_option("--fft-len", wf.fft_len, "FFT length")->capture_default_str();
  wsub->add_option("--cp-first-len", wf.cp_first_len, "CP of the first symbol in each slot")->capture_default_str();
  wsub->add_option("--cp-rest-len", wf.cp_rest_len, "CP of the other symbols")->capture_default_str();
  wsub->add_option("--symbols-per-slot", wf.symbols_per_slot, "Symbols per slot")->capture_default_str();
  wsub->add_option("--num-symbols", wf.num_symbols, "Symbols in the frame")->capture_default_str();
  wsub->add_option("--guard-tones", wf.guard_tones, "Null tones per band edge")->capture_default_str();
  wsub->add_option("--dc-null", wf.dc_null, "Null the DC tone")->capture_default_str();
  wsub->add_option("--gold-register-len", wf.gold.register_len, "Gold register length")->capture_default_str();
  wsub->add_option("--gold-taps-a", wf.gold.taps_a, "Taps of the first register");
  wsub->add_option("--gold-taps-b", wf.gold.taps_b, "Taps of the second register");
  wsub->add_option("--gold-seed-a", wf.gold_seed_a, "Initial state of the first register")->capture_default_str();
  wsub->add_option("--gold-seed-b", wf.gold_seed_b, "Initial state of the second register")->capture_default_str();
  wsub->add_flag("--uniform-cp", uniform_cp, "Use a uniform N/16 cyclic prefix");
  wsub->add_option("--out", iq_out, "Output .iq file (a .json sidecar is written next to it)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*wsub) {
      if (uniform_cp) wf.cp_first_len = wf.cp_rest_len = wf.fft_len / 16;
      wf.validate();
      const auto frame = generate_frame(wf);
      write_iq_file(iq_out, frame.samples);
      ScenarioConfig meta;
      meta.waveform = wf;
      write_iq_sidecar(iq_out, frame.size(), frame.sample_rate_hz, to_json(meta)["waveform"]);
      std::cout << "Wrote " << frame.size() << " samples to " << iq_out << '\n';
      return 0;
    }
    for (std::size_t i = 0; i < modes.size(); ++i)
      if (*subs[i]) return run_mode(modes[i].first, args[i]);
    if (top_defaults) {
      std::cout << to_json(default_config(Mode::Single)).dump(2) << '\n';
      return 0;
    }
    std::cout << app.help() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
