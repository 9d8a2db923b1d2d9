#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "pulserec/errors.hpp"

namespace pulserec {

/// Physical tag carried by every waveform. Operations either preserve the
/// tag or transform it explicitly; mixing two tagged quantities yields
/// `dimensionless`.
enum class Unit { volts, flux, dimensionless };

std::string to_string(Unit u);
Unit unit_from_string(const std::string& s);

/// Uniformly sampled real time series.
struct SampledWaveform {
  std::vector<double> samples;
  double dt = 0.0;  // seconds per sample, > 0
  double t0 = 0.0;  // time of samples[0], seconds
  Unit unit = Unit::dimensionless;

  std::size_t size() const { return samples.size(); }
  double duration() const { return dt * static_cast<double>(samples.size()); }
  double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
};

/// Complex two-sided spectrum in the X(w) = integral x(t) exp(-iwt) dt
/// convention, sampled as dt * DFT of the (zero padded) record. Bins follow
/// standard DFT order: k <= n/2 positive frequencies, then negative ones.
///
/// Frequency integrals carry the measure dnu = domega / (2 pi) = 1/(n dt) so
/// that the discrete Parseval identity holds without stray 2 pi factors.
struct Spectrum {
  std::vector<std::complex<double>> bins;
  double domega = 0.0;     // angular-frequency spacing, rad/s
  bool two_sided = true;   // false only for folded PSD views
  std::size_t n_time = 0;  // length of the originating record (pre padding)
  double dt = 0.0;         // sample period of the originating record
  double t0 = 0.0;
  Unit unit = Unit::dimensionless;

  std::size_t size() const { return bins.size(); }
  /// Ordinary-frequency spacing in Hz; the integration measure.
  double dnu() const;
  /// Signed angular frequency of bin k (two-sided layout).
  double omega_at(std::size_t k) const;
};

/// Half-open [begin, end) index range into a waveform.
struct PulseWindow {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
};

/// Linear (full) discrete convolution scaled by dt, approximating the
/// continuous integral; output length = len(a) + len(b) - 1.
SampledWaveform convolve(const SampledWaveform& a, const SampledWaveform& b);

/// Forward transform of the zero padded record (next power of two).
Spectrum fft(const SampledWaveform& w);

/// Inverse transform, truncated back to the originating record length. The
/// discarded relative imaginary energy is reported through
/// `imag_energy_fraction` when non-null.
SampledWaveform ifft(const Spectrum& s, double* imag_energy_fraction = nullptr);

/// Discrete analog of integral g(t) x(t) dt over a common grid.
double inner_product_time(const SampledWaveform& g, const SampledWaveform& x);

/// Discrete analog of integral conj(G) X dnu; the Parseval twin of
/// inner_product_time for same-grid real inputs.
std::complex<double> inner_product_freq(const Spectrum& g, const Spectrum& x);

/// Sum of |x|^2 dt (time) and |X|^2 dnu (frequency).
double energy_time(const SampledWaveform& x);
double energy_freq(const Spectrum& x);

/// Copy of the samples inside a window; preserves dt/unit, shifts t0.
SampledWaveform slice(const SampledWaveform& v, const PulseWindow& w);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

std::size_t next_pow2(std::size_t n);

namespace detail {
/// In-place radix-2 transform; a.size() must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);
void check_finite(const std::vector<double>& v, const char* what);
bool close_rel(double a, double b, double rel);
}  // namespace detail

}  // namespace pulserec
