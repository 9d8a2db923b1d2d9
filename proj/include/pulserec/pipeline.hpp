#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pulserec/detector.hpp"
#include "pulserec/estimators.hpp"
#include "pulserec/noise.hpp"
#include "pulserec/pattern.hpp"
#include "pulserec/signal.hpp"
#include "pulserec/wiener.hpp"

namespace pulserec {

/// Full experiment description: train geometry, noise environment, detector
/// model, power sweep and orchestration knobs. Loaded from the flat
/// `key = value` config format; every output embeds the canonical hash.
struct ExperimentConfig {
  PulseTrainSpec train;     // mean_power is replaced by each sweep point
  NoiseSpec noise;          // tech_relative_depth applies to the injected runs
  DetectorModel detector;

  double sweep_start = 0.0;        // watts
  double sweep_stop = 400e-6;      // watts
  double sweep_step = 20e-6;       // watts
  bool estimator_raw = true;
  bool estimator_wiener = true;
  bool estimator_optimal = true;
  bool technical_noise = true;     // false: force zero injection depth

  double reference_rotation = 10e-3;  // rad; calibration and Wiener training point
  std::size_t wiener_train_pulses = 200;
  std::size_t smooth_bins = 5;
  std::size_t char_segment = 4096;    // Welch segment for noise characterization
  double char_overlap = 0.5;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  int jobs = 1;

  std::vector<double> sweep_powers() const;
  std::string canonical_text() const;
  std::string hash() const;
};

ExperimentConfig experiment_from_config(const std::map<std::string, std::string>& kv);
ExperimentConfig experiment_from_file(const std::string& path);

/// Everything computed for one sweep power.
struct PowerCell {
  double power = 0.0;
  std::map<std::string, EstimateSeries> series;   // keyed raw_noisy, raw_clean, ...
  std::optional<PatternSolution> pattern;
  std::optional<WienerFilter> wiener;
  Spectrum psd_with_tech;     // one-sided characterization views
  Spectrum psd_no_tech;
  Spectrum psd_electronic;
  double shot_level = 0.0;
  double ds_dphi = 0.0;
};

/// Characterization products for one operating point (used by the CLI
/// solve-pattern stage and by run_sweep internally).
struct Characterization {
  NoiseParams params;
  PatternProblem problem;
  Spectrum psd_with_tech;   // one-sided, for reporting
  Spectrum psd_no_tech;
  Spectrum psd_electronic;
};

/// Builds the pattern problem for the given operating point from three
/// acquisitions (injected / clean / no light), which are synthesized from
/// the config unless traces are supplied.
Characterization characterize(const ExperimentConfig& cfg, double power,
                              const SampledWaveform* trace_with_tech = nullptr,
                              const SampledWaveform* trace_no_tech = nullptr,
                              const SampledWaveform* trace_electronic = nullptr);

/// Runs one sweep cell: characterize, solve, train Wiener, calibrate and
/// evaluate the selected estimators on injected and clean trains.
PowerCell run_power_cell(const ExperimentConfig& cfg, std::size_t power_index,
                         const SampledWaveform& electronic_train);

struct SweepResult {
  std::string summary_json;                 // canonical serialized summary
  std::vector<std::string> files_written;
};

/// Full pipeline: per power generate -> characterize -> solve -> estimate,
/// then variance fits, angle-noise curves and the per-figure CSV bundle.
SweepResult run_sweep(const ExperimentConfig& cfg);

}  // namespace pulserec
