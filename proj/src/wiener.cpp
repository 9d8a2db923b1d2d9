#include "pulserec/wiener.hpp"

#include <algorithm>
#include <cmath>

namespace pulserec {

SampledWaveform build_ideal(const PulseTrainSpec& ts, const NoiseSpec& ns, const DetectorModel& m) {
  return mean_detector_output(ts, ns, m);
}

EnsembleSpectra ensemble_spectra(const Spectrum& ideal, const SampledWaveform& v,
                                 const std::vector<PulseWindow>& windows) {
  if (windows.empty()) throw Error("ensemble_spectra: no windows");
  const std::size_t n = ideal.bins.size();

  EnsembleSpectra out;
  out.auto_psd = ideal;
  out.cross = ideal;
  std::fill(out.auto_psd.bins.begin(), out.auto_psd.bins.end(), std::complex<double>(0.0, 0.0));
  std::fill(out.cross.bins.begin(), out.cross.bins.end(), std::complex<double>(0.0, 0.0));

  std::vector<std::complex<double>> buf(n);
  for (const PulseWindow& w : windows) {
    if (w.end > v.samples.size() || w.begin >= w.end) throw Error("ensemble_spectra: window outside waveform");
    if (w.size() > n) throw Error("ensemble_spectra: window longer than the spectral grid");
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < w.size(); ++i) buf[i] = v.samples[w.begin + i];
    detail::fft_radix2(buf, false);
    for (std::size_t k = 0; k < n; ++k) {
      const std::complex<double> vk = buf[k] * v.dt;
      out.auto_psd.bins[k] += std::norm(vk);
      out.cross.bins[k] += std::conj(ideal.bins[k]) * vk;
    }
  }
  const double inv = 1.0 / static_cast<double>(windows.size());
  for (std::size_t k = 0; k < n; ++k) {
    out.auto_psd.bins[k] *= inv;
    out.cross.bins[k] *= inv;
  }
  out.pulses = windows.size();
  return out;
}

WienerFilter wiener_filter(const Spectrum& v_out_psd, const Spectrum& cross_psd) {
  if (v_out_psd.bins.size() != cross_psd.bins.size() ||
      !detail::close_rel(v_out_psd.domega, cross_psd.domega, 1e-6)) {
    throw Error("wiener_filter: spectra grids differ");
  }
  const std::size_t n = v_out_psd.bins.size();
  if (n < 2 || (n & (n - 1)) != 0) throw Error("wiener_filter: grid size must be a power of two");

  double peak = 0.0;
  for (const auto& b : v_out_psd.bins) peak = std::max(peak, b.real());
  if (!(peak > 0.0)) throw Error("wiener_filter: output power spectrum is identically zero");
  const double floor = peak * 1e-12;

  WienerFilter f;
  f.response = cross_psd;
  for (std::size_t k = 0; k < n; ++k) {
    double den = v_out_psd.bins[k].real();
    if (den < floor) {
      den = floor;
      ++f.regularized_bins;
    }
    f.response.bins[k] = cross_psd.bins[k] / den;
  }
  f.response.n_time = n;
  f.response.unit = Unit::dimensionless;

  Spectrum conj_resp = f.response;
  for (auto& b : conj_resp.bins) b = std::conj(b);
  f.weights_time = ifft(conj_resp);
  return f;
}

double wiener_estimate(const SampledWaveform& v, const WienerFilter& f, const PulseWindow& window) {
  if (window.begin >= window.end || window.end > v.samples.size()) {
    throw Error("wiener_estimate: window outside waveform");
  }
  const std::size_t n = std::min(window.size(), f.weights_time.samples.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += f.weights_time.samples[i] * v.samples[window.begin + i];
  return acc * v.dt;
}

}  // namespace pulserec
