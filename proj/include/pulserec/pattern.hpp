#pragma once

#include <complex>

#include "pulserec/signal.hpp"

namespace pulserec {

/// Inputs of the constrained minimum-variance pattern-function problem, all
/// on one two-sided spectral grid:
///   - common_response: detector kernel multiplying the common-mode flux
///     (the small mismatch residual channel; the orthogonality target),
///   - diff_response:   detector kernel multiplying the differential flux
///     (the signal channel; the calibration target),
///   - pulse_spectrum:  spectrum of the mean common-mode flux pulse,
///   - noise_psd:       two-sided technical + electronic PSD (real bins),
///   - pulse_dc:        pulse_spectrum at zero frequency, i.e. the mean
///     photon number; the calibration constraint pins the filter to it.
struct PatternProblem {
  Spectrum common_response;
  Spectrum diff_response;
  Spectrum pulse_spectrum;
  Spectrum noise_psd;
  double pulse_dc = 0.0;
};

/// Whitened Gram matrix of the two constraint directions
/// a = common_response * pulse_spectrum and b = diff_response * pulse_spectrum
/// under the 1/noise inner product: oo = <a,a>, oc = <b,a>, co = <a,b>,
/// cc = <b,b>. Hermitian symmetrization makes all four real.
struct GramMatrix {
  double oo = 0.0;
  double oc = 0.0;
  double co = 0.0;
  double cc = 0.0;
};

struct PatternSolution {
  Spectrum filter_spectrum;        // G
  SampledWaveform filter_time;     // g = ifft(G), real part
  double lambda_orth = 0.0;        // multiplier of the orthogonality constraint
  double lambda_cal = 0.0;         // multiplier of the calibration constraint
  GramMatrix gram;
  double noise_power = 0.0;        // predicted estimator noise variance
  double orth_residual = 0.0;      // |I_or| / (|G| |a|), dimensionless
  double cal_residual = 0.0;       // |I_cal - pulse_dc| / |pulse_dc|
  double discarded_imag_fraction = 0.0;
};

/// Overlap of the filter with the common-mode residual direction,
/// integral conj(G) common_response pulse_spectrum dnu. Must vanish for a
/// valid balanced estimator; its time-domain twin agrees by Parseval.
std::complex<double> constraint_orthogonality(const Spectrum& g, const PatternProblem& prob);

/// Overlap with the differential signal direction,
/// integral conj(G) diff_response pulse_spectrum dnu; equals pulse_dc for an
/// unbiased (calibrated) filter.
std::complex<double> constraint_calibration(const Spectrum& g, const PatternProblem& prob);

/// Predicted estimator noise variance integral |G|^2 noise_psd dnu.
double noise_power(const Spectrum& g, const PatternProblem& prob);

/// Minimum-noise filter satisfying both constraints, via the two-multiplier
/// stationarity system solved in closed form on the spectral grid.
PatternSolution solve_pattern(const PatternProblem& prob);

/// Relative floor applied to the noise PSD before any division.
inline constexpr double kNoiseFloorRel = 1e-6;

/// Relative determinant threshold below which the two constraint directions
/// are considered degenerate.
inline constexpr double kSingularRel = 1e-12;

}  // namespace pulserec
