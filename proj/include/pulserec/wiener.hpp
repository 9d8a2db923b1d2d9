#pragma once

#include <vector>

#include "pulserec/noise.hpp"
#include "pulserec/signal.hpp"

namespace pulserec {

/// Frequency-domain Wiener filter and its time-domain weighting function
/// w'(t) (the conjugate-response inverse transform actually applied to the
/// data).
struct WienerFilter {
  Spectrum response;            // W
  SampledWaveform weights_time; // w' = ifft(conj(W)), real
  std::size_t regularized_bins = 0;
};

/// Noise-free detector output for the nominal train: the reference the
/// Wiener filter is matched to. Identical to mean_detector_output.
SampledWaveform build_ideal(const PulseTrainSpec& ts, const NoiseSpec& ns, const DetectorModel& m);

/// Pulse-ensemble averaged auto spectrum <|V_out|^2> and cross spectrum
/// <conj(V_ideal) V_out> over the given windows, each window padded to the
/// ideal spectrum's grid.
struct EnsembleSpectra {
  Spectrum auto_psd;
  Spectrum cross;
  std::size_t pulses = 0;
};
EnsembleSpectra ensemble_spectra(const Spectrum& ideal, const SampledWaveform& v,
                                 const std::vector<PulseWindow>& windows);

/// W = cross / auto with a relative floor on the denominator; bins that hit
/// the floor are counted in regularized_bins.
WienerFilter wiener_filter(const Spectrum& v_out_psd, const Spectrum& cross_psd);

/// Windowed inner product of w' with the data (uncalibrated estimate).
double wiener_estimate(const SampledWaveform& v, const WienerFilter& f, const PulseWindow& window);

}  // namespace pulserec
