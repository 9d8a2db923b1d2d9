#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pulserec/detector.hpp"
#include "pulserec/signal.hpp"

namespace pulserec {

/// Noise environment of a synthetic acquisition.
///
/// The technical injection is a band-limited intensity modulation of the
/// light before the polarizing split. Most of it is common mode and is
/// removed by the balanced subtraction; tech_imbalance is the small fraction
/// that appears differentially (split-ratio fluctuations), which is what a
/// window estimator actually picks up. The differential part is driven by an
/// independent stream of the same band shape, so it carries no mean bias.
struct NoiseSpec {
  double electronic_psd = 1.0e-13;    // one-sided flat floor, V^2/Hz
  double tech_center_freq = 4.2e6;    // Hz
  double tech_fwhm = 1.2e6;           // Hz
  double tech_relative_depth = 0.2;   // rms fractional intensity modulation, in [0, 1)
  double tech_imbalance = 1.8e-3;     // differential fraction of the modulation, in [0, 1)
  double shot_scale = 4.8e12;         // photons per pulse per watt of mean power
  std::uint64_t seed = 1;
};

/// Pulse train geometry and operating point. Pulses are centered in their
/// repetition period; the period is pulse_width / duty_cycle.
struct PulseTrainSpec {
  std::size_t n_pulses = 800;
  double pulse_width = 400e-9;       // seconds
  double duty_cycle = 1.0 / 3.0;     // (0, 1]
  double mean_power = 400e-6;        // watts
  double rotation_angle = 0.0;       // radians; arm split (1 +- sin 2phi)/2
  double dt = 1.171875e-9;           // seconds per sample; 1024 samples per period

  double period() const { return pulse_width / duty_cycle; }
  std::size_t samples_per_period() const;
  std::size_t samples_per_pulse() const;
  std::size_t lead_samples() const;  // gap before the pulse inside its period
  std::size_t total_samples() const;
  double photons_per_pulse(const NoiseSpec& ns) const { return ns.shot_scale * mean_power; }
};

/// Deterministic stream derivation: one master seed, one stream per purpose
/// and index, so independent pulses/powers can be generated in any order (or
/// in parallel) with identical results.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

namespace seed_stream {
inline constexpr std::uint64_t kPhotonsH = 1;
inline constexpr std::uint64_t kPhotonsV = 2;
inline constexpr std::uint64_t kTechnical = 3;
inline constexpr std::uint64_t kElectronic = 4;
inline constexpr std::uint64_t kTechnicalSplit = 5;
}  // namespace seed_stream

struct GeneratedTrain {
  SampledWaveform v_out;              // detector electronic output, volts
  std::vector<double> pulse_truth;    // realized differential photon number per pulse
  SampledWaveform mean_flux_sum;      // noise-free mean of flux_h + flux_v (photons/s)
};

/// Full synthetic acquisition: Poissonian photon statistics per sample cell,
/// common-mode band-limited technical modulation of the optical intensity,
/// and white electronic noise on the detector output.
GeneratedTrain generate_train(const PulseTrainSpec& ts, const NoiseSpec& ns, const DetectorModel& m);

/// Noise-free mean detector output for the nominal train (no shot, technical
/// or electronic contribution). The noise spec only supplies the photon
/// scale.
SampledWaveform mean_detector_output(const PulseTrainSpec& ts, const NoiseSpec& ns, const DetectorModel& m);

/// Mean common-mode flux pulse, windowed on one repetition period and padded
/// to the spectral grid length.
SampledWaveform mean_pulse_flux(const PulseTrainSpec& ts, const NoiseSpec& ns, std::size_t padded_length);

/// Averaged-periodogram (Welch) PSD with a Hann window. One-sided by
/// default (bins 0..n/2); set one_sided = false for the two-sided view used
/// by the pattern solver. Units: input^2 / Hz.
Spectrum welch_psd(const SampledWaveform& v, std::size_t segment_length, double overlap,
                   bool one_sided = true);

struct NoiseParams {
  Spectrum technical;     // <|V_T|^2>, same grid as inputs
  Spectrum electronic;    // <|V_N|^2>
  double shot_level = 0;  // off-harmonic shot PSD level near the technical band
};

/// Separates the three PSD measurements of an acquisition (with injection,
/// without injection, no light) into the spectra the pattern solver needs.
/// All PSDs must share bins. rep_rate masks pulse-harmonic bins for the shot
/// level estimate; smooth_bins is the moving-average width applied to the
/// technical spectrum.
NoiseParams extract_noise_params(const Spectrum& psd_with_tech, const Spectrum& psd_no_tech,
                                 const Spectrum& psd_electronic, double rep_rate,
                                 std::size_t smooth_bins = 5);

/// Linear resampling of a (smooth) PSD onto a different bin grid; both
/// two-sided or both one-sided.
Spectrum resample_psd(const Spectrum& psd, double target_domega, std::size_t target_bins,
                      bool target_two_sided);

std::string to_config_text(const NoiseSpec& ns);
std::string to_config_text(const PulseTrainSpec& ts);
NoiseSpec noise_from_config(const std::map<std::string, std::string>& kv);
PulseTrainSpec train_from_config(const std::map<std::string, std::string>& kv);

}  // namespace pulserec
