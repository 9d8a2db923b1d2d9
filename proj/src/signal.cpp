#include "pulserec/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace pulserec {

namespace {

constexpr double kPi = std::numbers::pi;

Unit combine_units(Unit a, Unit b) {
  if (a == Unit::dimensionless) return b;
  if (b == Unit::dimensionless) return a;
  if (a == b) return a;
  return Unit::dimensionless;
}

}  // namespace

std::string to_string(Unit u) {
  switch (u) {
    case Unit::volts: return "volts";
    case Unit::flux: return "flux";
    case Unit::dimensionless: return "dimensionless";
  }
  return "dimensionless";
}

Unit unit_from_string(const std::string& s) {
  if (s == "volts") return Unit::volts;
  if (s == "flux") return Unit::flux;
  if (s == "dimensionless") return Unit::dimensionless;
  throw Error("unknown unit tag: " + s);
}

double Spectrum::dnu() const { return domega / (2.0 * kPi); }

double Spectrum::omega_at(std::size_t k) const {
  const std::size_t n = bins.size();
  if (!two_sided || k <= n / 2) return domega * static_cast<double>(k);
  return domega * (static_cast<double>(k) - static_cast<double>(n));
}

std::size_t next_pow2(std::size_t n) { return std::bit_ceil(n); }

namespace detail {

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(std::string(what) + ": non-finite sample");
  }
}

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw Error("fft_radix2: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  // One table of n/2 forward roots shared by all stages (stage `len` strides
  // by n/len); inverse runs conjugate the roots.
  static thread_local std::vector<std::complex<double>> table;
  static thread_local std::size_t table_n = 0;
  if (table_n != n) {
    table.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      table[k] = std::polar(1.0, -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n));
    }
    table_n = n;
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> tw = table[j * stride];
        const std::complex<double> w = inverse ? std::conj(tw) : tw;
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

}  // namespace detail

Spectrum fft(const SampledWaveform& w) {
  if (w.samples.size() < 2) throw Error("fft: waveform must have at least 2 samples");
  if (!(w.dt > 0.0)) throw Error("fft: dt must be positive");
  detail::check_finite(w.samples, "fft");

  const std::size_t n = next_pow2(w.samples.size());
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < w.samples.size(); ++i) buf[i] = w.samples[i];
  detail::fft_radix2(buf, false);

  Spectrum s;
  s.bins = std::move(buf);
  for (auto& b : s.bins) b *= w.dt;
  s.domega = 2.0 * kPi / (static_cast<double>(n) * w.dt);
  s.two_sided = true;
  s.n_time = w.samples.size();
  s.dt = w.dt;
  s.t0 = w.t0;
  s.unit = w.unit;
  return s;
}

SampledWaveform ifft(const Spectrum& s, double* imag_energy_fraction) {
  const std::size_t n = s.bins.size();
  if (n < 2 || (n & (n - 1)) != 0) throw Error("ifft: spectrum size must be a power of two >= 2");
  if (!s.two_sided) throw Error("ifft: requires a two-sided spectrum");
  if (!(s.domega > 0.0)) throw Error("ifft: domega must be positive");

  std::vector<std::complex<double>> buf = s.bins;
  detail::fft_radix2(buf, true);

  const double dt = s.dt > 0.0 ? s.dt : 2.0 * kPi / (s.domega * static_cast<double>(n));
  const std::size_t n_out = (s.n_time > 0 && s.n_time <= n) ? s.n_time : n;

  double real_energy = 0.0;
  double imag_energy = 0.0;
  SampledWaveform w;
  w.samples.resize(n_out);
  for (std::size_t i = 0; i < n; ++i) {
    const double re = buf[i].real() / dt;
    const double im = buf[i].imag() / dt;
    real_energy += re * re;
    imag_energy += im * im;
    if (i < n_out) w.samples[i] = re;
  }
  if (imag_energy_fraction) {
    const double total = real_energy + imag_energy;
    *imag_energy_fraction = total > 0.0 ? imag_energy / total : 0.0;
  }
  w.dt = dt;
  w.t0 = s.t0;
  w.unit = s.unit;
  return w;
}

SampledWaveform convolve(const SampledWaveform& a, const SampledWaveform& b) {
  if (a.samples.empty() || b.samples.empty()) throw Error("convolve: empty input");
  if (!(a.dt > 0.0) || !(b.dt > 0.0)) throw Error("convolve: dt must be positive");
  if (!detail::close_rel(a.dt, b.dt, 1e-6)) throw Error("convolve: sample periods differ by more than 1 ppm");
  detail::check_finite(a.samples, "convolve");
  detail::check_finite(b.samples, "convolve");

  const std::size_t n_out = a.samples.size() + b.samples.size() - 1;
  const std::size_t n = next_pow2(n_out);
  std::vector<std::complex<double>> fa(n), fb(n);
  for (std::size_t i = 0; i < a.samples.size(); ++i) fa[i] = a.samples[i];
  for (std::size_t i = 0; i < b.samples.size(); ++i) fb[i] = b.samples[i];
  detail::fft_radix2(fa, false);
  detail::fft_radix2(fb, false);
  for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
  detail::fft_radix2(fa, true);

  SampledWaveform out;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) out.samples[i] = fa[i].real() * a.dt;
  out.dt = a.dt;
  out.t0 = a.t0 + b.t0;
  out.unit = combine_units(a.unit, b.unit);
  return out;
}

double inner_product_time(const SampledWaveform& g, const SampledWaveform& x) {
  if (g.samples.size() != x.samples.size()) throw Error("inner_product_time: length mismatch");
  if (g.samples.empty()) throw Error("inner_product_time: empty input");
  if (!detail::close_rel(g.dt, x.dt, 1e-6)) throw Error("inner_product_time: sample periods differ");
  if (std::abs(g.t0 - x.t0) > 1e-6 * g.dt) throw Error("inner_product_time: grids not aligned in t0");
  double acc = 0.0;
  for (std::size_t i = 0; i < g.samples.size(); ++i) acc += g.samples[i] * x.samples[i];
  return acc * g.dt;
}

std::complex<double> inner_product_freq(const Spectrum& g, const Spectrum& x) {
  if (g.bins.size() != x.bins.size()) throw Error("inner_product_freq: bin count mismatch");
  if (!detail::close_rel(g.domega, x.domega, 1e-6)) throw Error("inner_product_freq: bin spacing mismatch");
  if (!g.two_sided || !x.two_sided) throw Error("inner_product_freq: requires two-sided spectra");
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < g.bins.size(); ++i) acc += std::conj(g.bins[i]) * x.bins[i];
  return acc * g.dnu();
}

double energy_time(const SampledWaveform& x) {
  double acc = 0.0;
  for (double v : x.samples) acc += v * v;
  return acc * x.dt;
}

double energy_freq(const Spectrum& x) {
  double acc = 0.0;
  for (const auto& b : x.bins) acc += std::norm(b);
  return acc * x.dnu();
}

SampledWaveform slice(const SampledWaveform& v, const PulseWindow& w) {
  if (w.begin >= w.end || w.end > v.samples.size()) throw Error("slice: window outside waveform");
  SampledWaveform out;
  out.samples.assign(v.samples.begin() + static_cast<std::ptrdiff_t>(w.begin),
                     v.samples.begin() + static_cast<std::ptrdiff_t>(w.end));
  out.dt = v.dt;
  out.t0 = v.time_at(w.begin);
  out.unit = v.unit;
  return out;
}

std::vector<double> hann_window(std::size_t n) {
  if (n == 0) throw Error("hann_window: empty window");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n)));
  }
  return w;
}

}  // namespace pulserec
