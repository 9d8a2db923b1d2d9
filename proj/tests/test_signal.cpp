#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "oracles.hpp"
#include "pulserec/signal.hpp"

using namespace pulserec;

namespace {

SampledWaveform make_wave(std::vector<double> samples, double dt, double t0 = 0.0,
                          Unit unit = Unit::dimensionless) {
  SampledWaveform w;
  w.samples = std::move(samples);
  w.dt = dt;
  w.t0 = t0;
  w.unit = unit;
  return w;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST_CASE("convolve: unit-area delta is the identity") {
  const double dt = 2e-9;
  SampledWaveform delta = make_wave({1.0 / dt}, dt);
  std::vector<double> pulse(64, 0.0);
  for (int i = 10; i < 40; ++i) pulse[i] = std::sin(0.1 * i) + 2.0;
  SampledWaveform p = make_wave(pulse, dt);

  const SampledWaveform out = convolve(delta, p);
  REQUIRE(out.samples.size() == pulse.size());
  for (std::size_t i = 0; i < pulse.size(); ++i) {
    CHECK(std::abs(out.samples[i] - pulse[i]) <= 1e-12 * std::abs(pulse[i]) + 1e-15);
  }
}

TEST_CASE("convolve: rectangle with itself gives a triangle of peak N dt, vs direct oracle") {
  const double dt = 0.5;
  const std::size_t n = 37;
  SampledWaveform rect = make_wave(std::vector<double>(n, 1.0), dt);
  const SampledWaveform out = convolve(rect, rect);
  REQUIRE(out.samples.size() == 2 * n - 1);

  const std::vector<double> expect = oracles::convolve_direct(rect.samples, rect.samples, dt);
  double peak = 0.0;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    CHECK(std::abs(out.samples[i] - expect[i]) <= 1e-12 * std::abs(expect[i]) + 1e-12);
    peak = std::max(peak, out.samples[i]);
  }
  CHECK(rel_err(peak, static_cast<double>(n) * dt) < 1e-12);
}

TEST_CASE("convolve: random inputs match the O(N^2) oracle") {
  const double dt = 1e-3;
  SampledWaveform a = make_wave(oracles::random_vector(123, 7), dt);
  SampledWaveform b = make_wave(oracles::random_vector(57, 8), dt);
  const SampledWaveform out = convolve(a, b);
  const std::vector<double> expect = oracles::convolve_direct(a.samples, b.samples, dt);
  double scale = 0.0;
  for (double v : expect) scale = std::max(scale, std::abs(v));
  REQUIRE(out.samples.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(std::abs(out.samples[i] - expect[i]) <= 1e-11 * scale);
  }
}

TEST_CASE("convolve: error paths") {
  SampledWaveform a = make_wave({1.0, 2.0}, 1.0);
  SampledWaveform b = make_wave({1.0}, 1.0 + 1e-3);
  CHECK_THROWS_AS((void)convolve(a, b), Error);
  SampledWaveform empty;
  empty.dt = 1.0;
  CHECK_THROWS_AS((void)convolve(a, empty), Error);
}

TEST_CASE("fft: constant waveform concentrates in the zero bin") {
  SampledWaveform w = make_wave(std::vector<double>(32, 3.0), 0.25);
  const Spectrum s = fft(w);
  CHECK(rel_err(s.bins[0].real(), 3.0 * 32 * 0.25) < 1e-12);
  for (std::size_t k = 1; k < s.bins.size(); ++k) CHECK(std::abs(s.bins[k]) < 1e-12 * std::abs(s.bins[0]));
}

TEST_CASE("fft: cosine at a bin frequency gives two equal conjugate bins") {
  const std::size_t n = 64;
  const std::size_t k0 = 5;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * M_PI * k0 * i / double(n));
  const Spectrum s = fft(make_wave(x, 1.0));
  CHECK(rel_err(s.bins[k0].real(), n / 2.0) < 1e-12);
  CHECK(std::abs(s.bins[k0].imag()) < 1e-9);
  CHECK(std::abs(s.bins[n - k0] - std::conj(s.bins[k0])) < 1e-9);
  for (std::size_t k = 0; k < n; ++k) {
    if (k != k0 && k != n - k0) CHECK(std::abs(s.bins[k]) < 1e-9);
  }
}

TEST_CASE("fft matches the direct DFT oracle") {
  const std::size_t n = 128;
  const std::vector<double> x = oracles::random_vector(n, 42);
  const Spectrum s = fft(make_wave(x, 0.5));
  std::vector<std::complex<double>> cx(x.begin(), x.end());
  const auto expect = oracles::dft_direct(cx);
  for (std::size_t k = 0; k < n; ++k) {
    CHECK(std::abs(s.bins[k] - 0.5 * expect[k]) <= 1e-10 * (1.0 + std::abs(expect[k])));
  }
}

TEST_CASE("fft/ifft round trip on random waveforms, including non-power-of-two lengths") {
  for (std::size_t n : {2ul, 33ul, 500ul, 1024ul}) {
    const std::vector<double> x = oracles::random_vector(n, 1000 + n);
    SampledWaveform w = make_wave(x, 1.5e-9, 4.2e-6, Unit::volts);
    double imag_frac = 1.0;
    const SampledWaveform back = ifft(fft(w), &imag_frac);
    REQUIRE(back.samples.size() == n);
    CHECK(back.unit == Unit::volts);
    CHECK(back.t0 == w.t0);
    CHECK(rel_err(back.dt, w.dt) < 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(back.samples[i] - x[i]) <= 1e-10 * (1.0 + std::abs(x[i])));
    }
  }
  SampledWaveform too_short = make_wave({1.0}, 1.0);
  CHECK_THROWS_AS((void)fft(too_short), Error);
}

TEST_CASE("inner products: window weight picks the pulse area; orthogonal vectors vanish") {
  const double dt = 0.125;
  std::vector<double> pulse(40, 0.0);
  for (int i = 8; i < 24; ++i) pulse[i] = 2.0;
  std::vector<double> gate(40, 0.0);
  for (int i = 0; i < 40; ++i) gate[i] = 1.0;
  const double area = inner_product_time(make_wave(gate, dt), make_wave(pulse, dt));
  CHECK(rel_err(area, 2.0 * 16 * dt) < 1e-12);

  // Odd function against an even one on a symmetric grid.
  std::vector<double> odd(40), even(40);
  for (int i = 0; i < 40; ++i) {
    const double t = (i - 19.5) * dt;
    odd[i] = t;
    even[i] = t * t;
  }
  const double ip = inner_product_time(make_wave(odd, dt), make_wave(even, dt));
  double norm_g = 0.0, norm_x = 0.0;
  for (int i = 0; i < 40; ++i) {
    norm_g += odd[i] * odd[i];
    norm_x += even[i] * even[i];
  }
  CHECK(std::abs(ip) <= 1e-12 * std::sqrt(norm_g * norm_x) * dt);
}

TEST_CASE("inner products: misaligned grids are rejected") {
  SampledWaveform a = make_wave({1.0, 2.0}, 1.0, 0.0);
  SampledWaveform b = make_wave({1.0, 2.0}, 1.0, 0.5);
  CHECK_THROWS_AS((void)inner_product_time(a, b), Error);
  SampledWaveform c = make_wave({1.0, 2.0, 3.0}, 1.0);
  CHECK_THROWS_AS((void)inner_product_time(a, c), Error);
}

TEST_CASE("Parseval: inner-product identity on random grids") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 16 + (rng() % 500);
    const double dt = 1e-9 * (1.0 + (rng() % 100) / 25.0);
    const std::vector<double> gv = oracles::random_vector(n, rng());
    const std::vector<double> xv = oracles::random_vector(n, rng());
    SampledWaveform g = make_wave(gv, dt), x = make_wave(xv, dt);

    const double lhs = inner_product_time(g, x);
    const std::complex<double> rhs = inner_product_freq(fft(g), fft(x));

    double ng = 0.0, nx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ng += gv[i] * gv[i];
      nx += xv[i] * xv[i];
    }
    const double scale = std::sqrt(ng * dt) * std::sqrt(nx * dt);
    CHECK(std::abs(lhs - rhs.real()) <= 1e-9 * scale);
    CHECK(std::abs(rhs.imag()) <= 1e-9 * scale);
  }
}

TEST_CASE("Parseval: power identity") {
  for (std::size_t n : {64ul, 300ul}) {
    const std::vector<double> x = oracles::random_vector(n, 7 + n);
    SampledWaveform w = make_wave(x, 2.5e-9);
    const double et = energy_time(w);
    const double ef = energy_freq(fft(w));
    CHECK(rel_err(ef, et) < 1e-9);
  }
}

TEST_CASE("convolution theorem after common padding") {
  const double dt = 1.0;
  const std::vector<double> av = oracles::random_vector(60, 21);
  const std::vector<double> bv = oracles::random_vector(50, 22);
  const SampledWaveform c = convolve(make_wave(av, dt), make_wave(bv, dt));

  // Pad both inputs to the convolution length so all three spectra share bins.
  std::vector<double> ap(c.samples.size(), 0.0), bp(c.samples.size(), 0.0);
  std::copy(av.begin(), av.end(), ap.begin());
  std::copy(bv.begin(), bv.end(), bp.begin());
  const Spectrum fa = fft(make_wave(ap, dt));
  const Spectrum fb = fft(make_wave(bp, dt));
  const Spectrum fc = fft(c);

  double scale = 0.0;
  for (std::size_t k = 0; k < fc.bins.size(); ++k) scale = std::max(scale, std::abs(fc.bins[k]));
  for (std::size_t k = 0; k < fc.bins.size(); ++k) {
    CHECK(std::abs(fa.bins[k] * fb.bins[k] - fc.bins[k]) <= 1e-9 * scale);
  }
}

TEST_CASE("slice keeps grid metadata") {
  SampledWaveform w = make_wave({0.0, 1.0, 2.0, 3.0, 4.0}, 0.5, 10.0, Unit::volts);
  const SampledWaveform s = slice(w, PulseWindow{1, 4});
  CHECK(s.samples == std::vector<double>({1.0, 2.0, 3.0}));
  CHECK(s.t0 == 10.5);
  CHECK(s.unit == Unit::volts);
  CHECK_THROWS_AS((void)slice(w, PulseWindow{3, 9}), Error);
}
