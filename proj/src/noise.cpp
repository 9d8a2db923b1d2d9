#include "pulserec/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pulserec/config.hpp"

namespace pulserec {

namespace {

constexpr double kPi = std::numbers::pi;

// Photon-count cells with mean above this use the Gaussian approximation
// (relative error < 1%); exact Poisson draws below.
constexpr double kPoissonGaussianCrossover = 1e4;

void validate_train(const PulseTrainSpec& ts) {
  if (ts.n_pulses < 1) throw Error("pulse train: need at least one pulse");
  if (!(ts.duty_cycle > 0.0) || ts.duty_cycle > 1.0) throw Error("pulse train: duty cycle must be in (0, 1]");
  if (!(ts.dt > 0.0) || !(ts.pulse_width > 0.0)) throw Error("pulse train: dt and pulse width must be positive");
  if (ts.mean_power < 0.0) throw Error("pulse train: mean power must be nonnegative");
  if (ts.pulse_width / ts.dt < 20.0) {
    throw Error("pulse train: grid does not resolve the pulse (need >= 20 samples per pulse)");
  }
}

void validate_noise(const NoiseSpec& ns) {
  if (ns.electronic_psd < 0.0) throw Error("noise spec: electronic PSD must be nonnegative");
  if (!(ns.tech_center_freq > 0.0)) throw Error("noise spec: technical center frequency must be positive");
  if (!(ns.tech_fwhm > 0.0)) throw Error("noise spec: technical FWHM must be positive");
  if (ns.tech_relative_depth < 0.0 || ns.tech_relative_depth >= 1.0) {
    throw Error("noise spec: technical depth must be in [0, 1)");
  }
  if (ns.tech_imbalance < 0.0 || ns.tech_imbalance >= 1.0) {
    throw Error("noise spec: technical imbalance must be in [0, 1)");
  }
  if (!(ns.shot_scale > 0.0)) throw Error("noise spec: shot scale must be positive");
}

}  // namespace

std::size_t PulseTrainSpec::samples_per_period() const {
  return static_cast<std::size_t>(std::llround(period() / dt));
}

std::size_t PulseTrainSpec::samples_per_pulse() const {
  return static_cast<std::size_t>(std::llround(pulse_width / dt));
}

std::size_t PulseTrainSpec::lead_samples() const {
  return (samples_per_period() - samples_per_pulse()) / 2;
}

std::size_t PulseTrainSpec::total_samples() const { return n_pulses * samples_per_period(); }

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  // SplitMix64 over (master, stream, index); reference finalizer constants.
  std::uint64_t z = master;
  for (std::uint64_t salt : {stream, index}) {
    z += 0x9e3779b97f4a7c15ULL + salt;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
  }
  return z;
}

namespace {

/// Band-limited unit-variance Gaussian noise: Hermitian frequency-domain
/// synthesis under a Gaussian band envelope centered at +-center.
std::vector<double> bandlimited_noise(std::size_t n_samples, double dt, double center, double fwhm,
                                      std::uint64_t seed) {
  const std::size_t n = next_pow2(n_samples);
  std::vector<std::complex<double>> bins(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma_f = fwhm / 2.3548200450309493;  // FWHM -> Gaussian sigma
  const double dnu = 1.0 / (static_cast<double>(n) * dt);
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double nu = dnu * static_cast<double>(k);
    const double env = std::exp(-0.5 * (nu - center) * (nu - center) / (sigma_f * sigma_f));
    // Draw both quadratures regardless of the envelope so decimating the
    // band does not change the stream alignment.
    const double re = normal(rng);
    const double im = normal(rng);
    bins[k] = env * std::complex<double>(re, im);
    bins[n - k] = std::conj(bins[k]);
  }
  bins[0] = 0.0;
  bins[n / 2] = 0.0;
  detail::fft_radix2(bins, true);

  std::vector<double> out(n_samples);
  double mean = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    out[i] = bins[i].real();
    mean += out[i];
  }
  mean /= static_cast<double>(n_samples);
  double var = 0.0;
  for (double& x : out) {
    x -= mean;
    var += x * x;
  }
  var /= static_cast<double>(n_samples);
  const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& x : out) x *= scale;
  return out;
}

double draw_photon_count(double mean, std::mt19937_64& rng, std::normal_distribution<double>& normal) {
  if (mean <= 0.0) return 0.0;
  if (mean < kPoissonGaussianCrossover) {
    std::poisson_distribution<long long> poisson(mean);
    return static_cast<double>(poisson(rng));
  }
  const double x = mean + std::sqrt(mean) * normal(rng);
  return x > 0.0 ? x : 0.0;
}

}  // namespace

SampledWaveform mean_detector_output(const PulseTrainSpec& ts, const NoiseSpec& ns, const DetectorModel& m) {
  validate_train(ts);
  const std::size_t n = ts.total_samples();
  const std::size_t per = ts.samples_per_period();
  const std::size_t width = ts.samples_per_pulse();
  const std::size_t lead = ts.lead_samples();

  // Build from the physical flux split so this stays bit-identical with
  // detector_output on the same mean fluxes.
  const double peak_flux = ts.photons_per_pulse(ns) / (static_cast<double>(width) * ts.dt);
  const double s2 = std::sin(2.0 * ts.rotation_angle);
  SampledWaveform flux_h, flux_v;
  flux_h.samples.assign(n, 0.0);
  flux_v.samples.assign(n, 0.0);
  flux_h.dt = flux_v.dt = ts.dt;
  flux_h.unit = flux_v.unit = Unit::flux;
  for (std::size_t j = 0; j < ts.n_pulses; ++j) {
    const std::size_t base = j * per + lead;
    for (std::size_t i = 0; i < width; ++i) {
      flux_h.samples[base + i] = peak_flux * 0.5 * (1.0 + s2);
      flux_v.samples[base + i] = peak_flux * 0.5 * (1.0 - s2);
    }
  }
  return detector_output(m, flux_h, flux_v);
}

SampledWaveform mean_pulse_flux(const PulseTrainSpec& ts, const NoiseSpec& ns, std::size_t padded_length) {
  validate_train(ts);
  const std::size_t per = ts.samples_per_period();
  const std::size_t width = ts.samples_per_pulse();
  const std::size_t lead = ts.lead_samples();
  if (padded_length < per) throw Error("mean_pulse_flux: padded length shorter than one period");
  const double peak_flux = ts.photons_per_pulse(ns) / (static_cast<double>(width) * ts.dt);
  SampledWaveform w;
  w.samples.assign(padded_length, 0.0);
  w.dt = ts.dt;
  w.unit = Unit::flux;
  for (std::size_t i = 0; i < width; ++i) w.samples[lead + i] = peak_flux;
  return w;
}

GeneratedTrain generate_train(const PulseTrainSpec& ts, const NoiseSpec& ns, const DetectorModel& m) {
  validate_train(ts);
  validate_noise(ns);

  const std::size_t n = ts.total_samples();
  const std::size_t per = ts.samples_per_period();
  const std::size_t width = ts.samples_per_pulse();
  const std::size_t lead = ts.lead_samples();
  const double photons = ts.photons_per_pulse(ns);
  const double mean_per_cell = photons / static_cast<double>(width);
  const double s2 = std::sin(2.0 * ts.rotation_angle);
  const double frac_h = 0.5 * (1.0 + s2);
  const double frac_v = 0.5 * (1.0 - s2);

  std::vector<double> tech;
  std::vector<double> split;  // differential split-ratio fluctuation
  if (ns.tech_relative_depth > 0.0) {
    tech = bandlimited_noise(n, ts.dt, ns.tech_center_freq, ns.tech_fwhm,
                             split_seed(ns.seed, seed_stream::kTechnical));
    for (double& x : tech) x *= ns.tech_relative_depth;
    if (ns.tech_imbalance > 0.0) {
      split = bandlimited_noise(n, ts.dt, ns.tech_center_freq, ns.tech_fwhm,
                                split_seed(ns.seed, seed_stream::kTechnicalSplit));
      const double scale = ns.tech_relative_depth * ns.tech_imbalance;
      for (double& x : split) x *= scale;
    }
  }

  SampledWaveform flux_h, flux_v;
  flux_h.samples.assign(n, 0.0);
  flux_v.samples.assign(n, 0.0);
  flux_h.dt = flux_v.dt = ts.dt;
  flux_h.unit = flux_v.unit = Unit::flux;

  GeneratedTrain out;
  out.pulse_truth.assign(ts.n_pulses, 0.0);
  out.mean_flux_sum.samples.assign(n, 0.0);
  out.mean_flux_sum.dt = ts.dt;
  out.mean_flux_sum.unit = Unit::flux;

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < ts.n_pulses; ++j) {
    std::mt19937_64 rng_h(split_seed(ns.seed, seed_stream::kPhotonsH, j));
    std::mt19937_64 rng_v(split_seed(ns.seed, seed_stream::kPhotonsV, j));
    const std::size_t base = j * per + lead;
    double diff = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      const std::size_t idx = base + i;
      const double envelope = tech.empty() ? 1.0 : std::max(0.0, 1.0 + tech[idx]);
      const double split_d = split.empty() ? 0.0 : split[idx];
      const double cell_mean = mean_per_cell * envelope;
      const double nh = draw_photon_count(cell_mean * std::clamp(frac_h + 0.5 * split_d, 0.0, 1.0), rng_h, normal);
      const double nv = draw_photon_count(cell_mean * std::clamp(frac_v - 0.5 * split_d, 0.0, 1.0), rng_v, normal);
      flux_h.samples[idx] = nh / ts.dt;
      flux_v.samples[idx] = nv / ts.dt;
      out.mean_flux_sum.samples[idx] = mean_per_cell / ts.dt;
      diff += nh - nv;
    }
    out.pulse_truth[j] = diff;
  }

  out.v_out = detector_output(m, flux_h, flux_v);

  if (ns.electronic_psd > 0.0) {
    std::mt19937_64 rng_e(split_seed(ns.seed, seed_stream::kElectronic));
    const double sigma = std::sqrt(ns.electronic_psd / (2.0 * ts.dt));
    for (double& v : out.v_out.samples) v += sigma * normal(rng_e);
  }
  return out;
}

Spectrum welch_psd(const SampledWaveform& v, std::size_t segment_length, double overlap, bool one_sided) {
  if (segment_length < 4) throw Error("welch_psd: segment too short");
  if (segment_length > v.samples.size()) throw Error("welch_psd: segment longer than input");
  if (overlap < 0.0 || overlap > 0.9) throw Error("welch_psd: overlap must be in [0, 0.9]");
  if (!(v.dt > 0.0)) throw Error("welch_psd: dt must be positive");

  const std::size_t n = next_pow2(segment_length);
  const std::vector<double> window = hann_window(segment_length);
  double u = 0.0;
  for (double w : window) u += w * w;
  u /= static_cast<double>(segment_length);

  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(segment_length) * (1.0 - overlap))));
  std::vector<double> acc(n, 0.0);
  std::vector<std::complex<double>> buf(n);
  std::size_t count = 0;
  for (std::size_t start = 0; start + segment_length <= v.samples.size(); start += hop) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (std::size_t i = 0; i < segment_length; ++i) buf[i] = v.samples[start + i] * window[i];
    detail::fft_radix2(buf, false);
    for (std::size_t k = 0; k < n; ++k) acc[k] += std::norm(buf[k]);
    ++count;
  }
  if (count == 0) throw Error("welch_psd: no full segment fits the input");

  // dt^2 |DFT|^2 / (T u): integrates (measure dnu) to the windowed mean
  // square of the record.
  const double norm = v.dt * v.dt /
                      (static_cast<double>(count) * static_cast<double>(segment_length) * v.dt * u);

  Spectrum s;
  s.domega = 2.0 * kPi / (static_cast<double>(n) * v.dt);
  s.n_time = segment_length;
  s.dt = v.dt;
  s.unit = Unit::dimensionless;
  if (one_sided) {
    s.two_sided = false;
    s.bins.resize(n / 2 + 1);
    s.bins[0] = acc[0] * norm;
    s.bins[n / 2] = acc[n / 2] * norm;
    for (std::size_t k = 1; k < n / 2; ++k) s.bins[k] = (acc[k] + acc[n - k]) * norm;
  } else {
    s.two_sided = true;
    s.bins.resize(n);
    for (std::size_t k = 0; k < n; ++k) s.bins[k] = acc[k] * norm;
  }
  return s;
}

namespace {

void check_same_grid(const Spectrum& a, const Spectrum& b, const char* what) {
  if (a.bins.size() != b.bins.size() || a.two_sided != b.two_sided ||
      !detail::close_rel(a.domega, b.domega, 1e-6)) {
    throw Error(std::string(what) + ": PSD bin grids differ");
  }
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t width) {
  if (width <= 1) return x;
  std::vector<double> out(x.size());
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width) / 2;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    int cnt = 0;
    for (std::ptrdiff_t j = i - half; j <= i + half; ++j) {
      if (j >= 0 && j < n) {
        acc += x[static_cast<std::size_t>(j)];
        ++cnt;
      }
    }
    out[static_cast<std::size_t>(i)] = acc / cnt;
  }
  return out;
}

}  // namespace

NoiseParams extract_noise_params(const Spectrum& psd_with_tech, const Spectrum& psd_no_tech,
                                 const Spectrum& psd_electronic, double rep_rate,
                                 std::size_t smooth_bins) {
  check_same_grid(psd_with_tech, psd_no_tech, "extract_noise_params");
  check_same_grid(psd_with_tech, psd_electronic, "extract_noise_params");
  const std::size_t nbins = psd_with_tech.bins.size();

  NoiseParams out;
  out.electronic = psd_electronic;

  std::vector<double> tech(nbins);
  for (std::size_t k = 0; k < nbins; ++k) {
    tech[k] = std::max(0.0, psd_with_tech.bins[k].real() - psd_no_tech.bins[k].real());
  }
  tech = moving_average(tech, smooth_bins);
  out.technical = psd_with_tech;
  for (std::size_t k = 0; k < nbins; ++k) out.technical.bins[k] = tech[k];

  // Shot level: median of (no-tech - electronic) over off-harmonic bins in
  // the upper half of the band, where the pulse comb is sparse.
  const double dnu = psd_with_tech.dnu();
  std::vector<double> shot_bins;
  for (std::size_t k = 1; k < nbins; ++k) {
    const double nu = std::abs(psd_with_tech.omega_at(k)) / (2.0 * kPi);
    if (rep_rate > 0.0) {
      const double frac = nu / rep_rate;
      const double dist = std::abs(frac - std::round(frac)) * rep_rate;
      if (dist < 1.5 * dnu) continue;  // harmonic-adjacent
    }
    const double level = psd_no_tech.bins[k].real() - psd_electronic.bins[k].real();
    if (std::isfinite(level)) shot_bins.push_back(level);
  }
  if (!shot_bins.empty()) {
    const std::size_t mid = shot_bins.size() / 2;
    std::nth_element(shot_bins.begin(), shot_bins.begin() + static_cast<std::ptrdiff_t>(mid), shot_bins.end());
    out.shot_level = std::max(0.0, shot_bins[mid]);
  }
  return out;
}

Spectrum resample_psd(const Spectrum& psd, double target_domega, std::size_t target_bins,
                      bool target_two_sided) {
  if (psd.bins.empty()) throw Error("resample_psd: empty PSD");
  if (psd.two_sided != target_two_sided) throw Error("resample_psd: sidedness must match");
  const std::size_t n_src = psd.bins.size();
  const std::size_t n_half_src = psd.two_sided ? n_src / 2 : n_src - 1;

  auto value_at_abs_freq = [&](double omega_abs) -> double {
    const double x = omega_abs / psd.domega;
    if (x <= 0.0) return psd.bins[0].real();
    if (x >= static_cast<double>(n_half_src)) return psd.bins[n_half_src].real();
    const auto lo = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(lo);
    return (1.0 - frac) * psd.bins[lo].real() + frac * psd.bins[lo + 1].real();
  };

  Spectrum out;
  out.domega = target_domega;
  out.two_sided = target_two_sided;
  out.dt = psd.dt;
  out.bins.resize(target_bins);
  for (std::size_t k = 0; k < target_bins; ++k) {
    double omega_abs;
    if (target_two_sided && k > target_bins / 2) {
      omega_abs = target_domega * (static_cast<double>(target_bins) - static_cast<double>(k));
    } else {
      omega_abs = target_domega * static_cast<double>(k);
    }
    out.bins[k] = value_at_abs_freq(omega_abs);
  }
  return out;
}

std::string to_config_text(const NoiseSpec& ns) {
  std::ostringstream os;
  os << "noise.electronic_psd = " << format_double(ns.electronic_psd) << "\n";
  os << "noise.tech_center_freq = " << format_double(ns.tech_center_freq) << "\n";
  os << "noise.tech_fwhm = " << format_double(ns.tech_fwhm) << "\n";
  os << "noise.tech_relative_depth = " << format_double(ns.tech_relative_depth) << "\n";
  os << "noise.tech_imbalance = " << format_double(ns.tech_imbalance) << "\n";
  os << "noise.shot_scale = " << format_double(ns.shot_scale) << "\n";
  os << "noise.seed = " << ns.seed << "\n";
  return os.str();
}

std::string to_config_text(const PulseTrainSpec& ts) {
  std::ostringstream os;
  os << "train.n_pulses = " << ts.n_pulses << "\n";
  os << "train.pulse_width = " << format_double(ts.pulse_width) << "\n";
  os << "train.duty_cycle = " << format_double(ts.duty_cycle) << "\n";
  os << "train.mean_power = " << format_double(ts.mean_power) << "\n";
  os << "train.rotation_angle = " << format_double(ts.rotation_angle) << "\n";
  os << "train.dt = " << format_double(ts.dt) << "\n";
  return os.str();
}

NoiseSpec noise_from_config(const std::map<std::string, std::string>& kv) {
  NoiseSpec ns;
  ns.electronic_psd = get_double(kv, "noise.electronic_psd", ns.electronic_psd);
  ns.tech_center_freq = get_double(kv, "noise.tech_center_freq", ns.tech_center_freq);
  ns.tech_fwhm = get_double(kv, "noise.tech_fwhm", ns.tech_fwhm);
  ns.tech_relative_depth = get_double(kv, "noise.tech_relative_depth", ns.tech_relative_depth);
  ns.tech_imbalance = get_double(kv, "noise.tech_imbalance", ns.tech_imbalance);
  ns.shot_scale = get_double(kv, "noise.shot_scale", ns.shot_scale);
  ns.seed = get_u64(kv, "noise.seed", ns.seed);
  validate_noise(ns);
  return ns;
}

PulseTrainSpec train_from_config(const std::map<std::string, std::string>& kv) {
  PulseTrainSpec ts;
  ts.n_pulses = static_cast<std::size_t>(get_u64(kv, "train.n_pulses", ts.n_pulses));
  ts.pulse_width = get_double(kv, "train.pulse_width", ts.pulse_width);
  ts.duty_cycle = get_double(kv, "train.duty_cycle", ts.duty_cycle);
  ts.mean_power = get_double(kv, "train.mean_power", ts.mean_power);
  ts.rotation_angle = get_double(kv, "train.rotation_angle", ts.rotation_angle);
  ts.dt = get_double(kv, "train.dt", ts.dt);
  validate_train(ts);
  return ts;
}

}  // namespace pulserec
