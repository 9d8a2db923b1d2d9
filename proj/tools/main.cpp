#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pulserec/config.hpp"
#include "pulserec/pipeline.hpp"
#include "pulserec/trace_io.hpp"
#include "pulserec/version.hpp"

namespace {

using pulserec::Error;
using ordered_json = nlohmann::ordered_json;

pulserec::ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return pulserec::experiment_from_config({});
  return pulserec::experiment_from_file(path);
}

void apply_overrides(pulserec::ExperimentConfig& cfg, const std::optional<double>& power,
                     const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out_dir,
                     bool no_technical_noise, const std::vector<std::string>& estimators, int jobs) {
  if (power) cfg.train.mean_power = *power;
  if (seed) {
    cfg.seed = *seed;
    cfg.noise.seed = *seed;
  }
  if (out_dir) cfg.output_dir = *out_dir;
  if (no_technical_noise) cfg.technical_noise = false;
  if (!estimators.empty()) {
    cfg.estimator_raw = cfg.estimator_wiener = cfg.estimator_optimal = false;
    for (const std::string& e : estimators) {
      if (e == "raw") {
        cfg.estimator_raw = true;
      } else if (e == "wiener") {
        cfg.estimator_wiener = true;
      } else if (e == "optimal") {
        cfg.estimator_optimal = true;
      } else {
        throw Error("unknown estimator: " + e + " (expected raw, wiener or optimal)");
      }
    }
  }
  if (jobs > 0) cfg.jobs = jobs;
}

int run_simulate(const pulserec::ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  pulserec::NoiseSpec ns = cfg.noise;
  if (!cfg.technical_noise) ns.tech_relative_depth = 0.0;
  const pulserec::GeneratedTrain train = pulserec::generate_train(cfg.train, ns, cfg.detector);

  pulserec::TraceMetadata meta;
  meta.seed = cfg.seed;
  meta.spec_hash = cfg.hash();
  const auto trace_path = (std::filesystem::path(cfg.output_dir) / "trace.csv").string();
  pulserec::write_trace(trace_path, train.v_out, meta);

  const auto truth_path = (std::filesystem::path(cfg.output_dir) / "truth.csv").string();
  std::ofstream truth(truth_path);
  if (!truth) throw Error("cannot open " + truth_path);
  truth << "# config_hash = " << meta.spec_hash << "\n# version = " << pulserec::kVersion << "\n";
  truth << "pulse,differential_photons\n";
  for (std::size_t j = 0; j < train.pulse_truth.size(); ++j) {
    truth << j << "," << pulserec::format_double(train.pulse_truth[j]) << "\n";
  }
  std::cout << "wrote " << trace_path << " (" << train.v_out.samples.size() << " samples) and " << truth_path
            << "\n";
  return 0;
}

int run_solve_pattern(const pulserec::ExperimentConfig& cfg, const std::string& trace_with,
                      const std::string& trace_without, const std::string& trace_electronic) {
  std::filesystem::create_directories(cfg.output_dir);
  std::optional<pulserec::SampledWaveform> with_w, without_w, el_w;
  if (!trace_with.empty()) with_w = pulserec::read_trace(trace_with).waveform;
  if (!trace_without.empty()) without_w = pulserec::read_trace(trace_without).waveform;
  if (!trace_electronic.empty()) el_w = pulserec::read_trace(trace_electronic).waveform;

  const pulserec::Characterization ch =
      pulserec::characterize(cfg, cfg.train.mean_power, with_w ? &*with_w : nullptr,
                             without_w ? &*without_w : nullptr, el_w ? &*el_w : nullptr);
  const pulserec::PatternSolution sol = pulserec::solve_pattern(ch.problem);
  const auto base = (std::filesystem::path(cfg.output_dir) / "pattern").string();
  pulserec::export_pattern_solution(base, sol, cfg.hash());

  ordered_json j;
  j["power_w"] = cfg.train.mean_power;
  j["lambda_orth"] = sol.lambda_orth;
  j["lambda_cal"] = sol.lambda_cal;
  j["noise_power"] = sol.noise_power;
  j["orth_residual"] = sol.orth_residual;
  j["cal_residual"] = sol.cal_residual;
  j["shot_level"] = ch.params.shot_level;
  j["files"] = {base + "_time.csv", base + "_freq.csv"};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_estimate(const pulserec::ExperimentConfig& cfg, const std::string& trace_path) {
  std::filesystem::create_directories(cfg.output_dir);
  pulserec::PulseTrainSpec ts = cfg.train;
  pulserec::NoiseSpec ns = cfg.noise;
  if (!cfg.technical_noise) ns.tech_relative_depth = 0.0;

  pulserec::SampledWaveform data;
  if (!trace_path.empty()) {
    data = pulserec::read_trace(trace_path).waveform;
  } else {
    data = pulserec::generate_train(ts, ns, cfg.detector).v_out;
  }

  const double guard = 5.0 * cfg.detector.tau_tia;
  const auto windows = pulserec::segment_pulses(data, ts, guard);
  const std::size_t window = ts.samples_per_period();
  const std::size_t ringdown = static_cast<std::size_t>(std::ceil(guard / ts.dt));

  // Calibration on the noise-free reference run, as in the sweep.
  pulserec::PulseTrainSpec ts_ref = ts;
  ts_ref.rotation_angle = cfg.reference_rotation;
  ts_ref.n_pulses = 8;
  const pulserec::SampledWaveform cal_out = pulserec::mean_detector_output(ts_ref, ns, cfg.detector);
  auto cal_windows = pulserec::segment_pulses(cal_out, ts_ref, guard);
  cal_windows.erase(cal_windows.begin());
  const double s_ref = ts.photons_per_pulse(ns) * std::sin(2.0 * cfg.reference_rotation);

  std::vector<pulserec::EstimatorPattern> patterns;
  if (cfg.estimator_raw) patterns.push_back(pulserec::raw_pattern(ts, window, ringdown));
  if (cfg.estimator_optimal) {
    const auto ch = pulserec::characterize(cfg, ts.mean_power);
    patterns.push_back(pulserec::pattern_from_solution(pulserec::solve_pattern(ch.problem), window));
  }
  const auto out_path = (std::filesystem::path(cfg.output_dir) / "estimates.csv").string();
  std::ofstream f(out_path);
  if (!f) throw Error("cannot open " + out_path);
  f << "# config_hash = " << cfg.hash() << "\n# version = " << pulserec::kVersion << "\n";
  f << "estimator,pulse,estimate\n";
  for (auto& pattern : patterns) {
    pulserec::EstimateSeries ref = pulserec::estimate_all(cal_out, cal_windows, pattern);
    pattern.calibration = s_ref / pulserec::mean(ref.values);
    const pulserec::EstimateSeries series = pulserec::estimate_all(data, windows, pattern);
    for (std::size_t j = 0; j < series.values.size(); ++j) {
      f << pulserec::to_string(series.kind) << "," << j << "," << pulserec::format_double(series.values[j])
        << "\n";
    }
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int run_ingest(const std::vector<std::string>& paths) {
  ordered_json report = ordered_json::array();
  for (const std::string& p : paths) {
    const pulserec::LoadedTrace t = pulserec::read_trace(p);
    ordered_json j;
    j["path"] = p;
    j["n_samples"] = t.waveform.samples.size();
    j["dt"] = t.waveform.dt;
    j["unit"] = pulserec::to_string(t.waveform.unit);
    j["seed"] = t.meta.seed;
    j["spec_hash"] = t.meta.spec_hash;
    report.push_back(j);
  }
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulserec: shot-noise-limited pulse recovery for balanced detection"};
  app.set_version_flag("--version", pulserec::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<double> power;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool no_technical_noise = false;
  std::vector<std::string> estimators;
  int jobs = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value)");
    cmd->add_option("--power", power, "override train.mean_power, watts");
    cmd->add_option("--seed", seed, "override the master seed");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_flag("--no-technical-noise", no_technical_noise, "disable the technical-noise injection");
    cmd->add_option("--estimators", estimators, "estimator subset (raw wiener optimal)");
    cmd->add_option("--jobs", jobs, "parallel sweep cells");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic acquisition and export it");
  add_common(simulate);
  CLI::App* solve = app.add_subcommand("solve-pattern", "characterize noise and solve the optimal pattern");
  add_common(solve);
  std::string trace_with, trace_without, trace_electronic;
  solve->add_option("--trace-with-tech", trace_with, "measured trace with injection (otherwise synthetic)");
  solve->add_option("--trace-no-tech", trace_without, "measured trace without injection");
  solve->add_option("--trace-electronic", trace_electronic, "measured no-light trace");
  CLI::App* estimate = app.add_subcommand("estimate", "evaluate estimators on a trace");
  add_common(estimate);
  std::string trace_path;
  estimate->add_option("--trace", trace_path, "trace file (otherwise synthesized from the config)");
  CLI::App* sweep = app.add_subcommand("sweep", "full power sweep with report bundle");
  add_common(sweep);
  CLI::App* ingest = app.add_subcommand("ingest", "validate trace files");
  std::vector<std::string> ingest_paths;
  ingest->add_option("paths", ingest_paths, "trace files")->required();

  CLI11_PARSE(app, argc, argv);

  const char* stage = "config";
  try {
    if (app.got_subcommand(ingest)) {
      stage = "ingest";
      return run_ingest(ingest_paths);
    }
    pulserec::ExperimentConfig cfg = load_config(config_path);
    apply_overrides(cfg, power, seed, out_dir, no_technical_noise, estimators, jobs);
    if (app.got_subcommand(simulate)) {
      stage = "simulate";
      return run_simulate(cfg);
    }
    if (app.got_subcommand(solve)) {
      stage = "solve-pattern";
      return run_solve_pattern(cfg, trace_with, trace_without, trace_electronic);
    }
    if (app.got_subcommand(estimate)) {
      stage = "estimate";
      return run_estimate(cfg, trace_path);
    }
    if (app.got_subcommand(sweep)) {
      stage = "sweep";
      const pulserec::SweepResult result = pulserec::run_sweep(cfg);
      std::cout << result.summary_json;
      return 0;
    }
  } catch (const std::exception& e) {
    ordered_json err;
    err["stage"] = stage;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 2;
}
