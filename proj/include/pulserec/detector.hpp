#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>

#include "pulserec/signal.hpp"

namespace pulserec {

/// Two-pole balanced-detector model: each photodiode is a single-pole filter
/// (time constant tau_h / tau_v) followed by the shared transimpedance
/// amplifier pole tau_tia, with a per-arm dead-time delay. The wired current
/// subtraction of the two arms is expressed through the signed gain inside
/// detector_output(); the per-arm impulse responses themselves are positive
/// unit-area shapes.
struct DetectorModel {
  double tau_tia = 32e-9;    // amplifier pole, seconds
  double tau_h = 1.0e-9;     // H photodiode pole, seconds
  double tau_v = 1.3e-9;     // V photodiode pole, seconds
  double gain = 1.25e-14;    // volts per unit photon flux, V/(photon/s)
  double delay_h = 0.0;      // path dead time of the H arm, seconds
  double delay_v = 0.2e-9;   // path dead time of the V arm, seconds
};

enum class Photodiode { H, V };

struct GridSpec {
  double dt = 0.0;
  std::size_t length = 0;
};

/// Relative pole separation below which the degenerate (equal-tau) limit
/// form t exp(-t/tau)/tau^2 is used instead of the two-exponential formula.
inline constexpr double kTauDegeneracyThreshold = 1e-9;

/// Grid span, in units of the slowest time constant, used when choosing
/// response grids internally (keeps the truncated tail below 1e-6).
inline constexpr double kResponseSpanTaus = 16.0;

/// Cell-averaged samples of the arm's unit-area impulse response on the
/// grid. The grid must span at least 10 times the largest time constant
/// plus the arm delay.
SampledWaveform impulse_response(const DetectorModel& m, Photodiode which, const GridSpec& grid);

/// Pointwise sum and difference of the two unit-shape responses,
/// (h_sum, h_diff) = (h_H + h_V, h_H - h_V). h_diff vanishes identically
/// iff the two arms are identical.
std::pair<SampledWaveform, SampledWaveform> sum_diff_responses(const DetectorModel& m, const GridSpec& grid);

/// Gain-scaled response kernels of the subtracting detector, named by the
/// flux component they multiply in the output decomposition
///   v_out = (common_mode * flux_sum + differential * flux_diff) / 2 + noise.
/// common_mode = gain (h_H - h_V) is the small mismatch residual kernel;
/// differential = gain (h_H + h_V) carries the differential photon signal.
struct BalancedResponses {
  SampledWaveform common_mode;
  SampledWaveform differential;
};
BalancedResponses balanced_responses(const DetectorModel& m, const GridSpec& grid);

/// Electronic output of the balanced detector for the two arm fluxes:
/// gain (h_H * flux_h - h_V * flux_v) truncated to the input grid, plus an
/// optional pre-generated electronic-noise record on the same grid.
SampledWaveform detector_output(const DetectorModel& m, const SampledWaveform& flux_h,
                                const SampledWaveform& flux_v,
                                const SampledWaveform* electronic_noise = nullptr);

struct FitResult {
  DetectorModel model;
  double residual_rms = 0.0;  // RMS of the best fit residual, output units
  double peak = 0.0;          // peak of the observed slow pulse
  int iterations = 0;
};

/// Thrown when the response fit fails to converge; carries the best
/// parameters seen so far.
struct FitError : Error {
  FitResult best;
  FitError(const std::string& msg, FitResult b) : Error(msg), best(std::move(b)) {}
};

/// Fits (tau_tia, tau_which) so that convolve(p_fast, h) matches p_slow in
/// least squares, with a free amplitude to absorb normalization. The two
/// time constants are interchangeable in the model; the result is
/// canonicalized with tau_tia >= tau_which. Deterministic given init.
FitResult fit_response(const SampledWaveform& p_fast, const SampledWaveform& p_slow,
                       const DetectorModel& init, Photodiode which);

/// Human-readable key = value serialization (SI units).
std::string to_config_text(const DetectorModel& m);
DetectorModel detector_from_config(const std::map<std::string, std::string>& kv);

}  // namespace pulserec
