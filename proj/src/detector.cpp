#include "pulserec/detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "pulserec/config.hpp"

namespace pulserec {

namespace {

double arm_tau(const DetectorModel& m, Photodiode which) {
  return which == Photodiode::H ? m.tau_h : m.tau_v;
}

double arm_delay(const DetectorModel& m, Photodiode which) {
  return which == Photodiode::H ? m.delay_h : m.delay_v;
}

bool degenerate(double tau_a, double tau_b) {
  return std::abs(tau_a - tau_b) < kTauDegeneracyThreshold * std::max(tau_a, tau_b);
}

/// Antiderivative F(t) = integral_0^t h, with F(inf) = 1.
double response_cdf(double t, double tau_a, double tau_b) {
  if (t <= 0.0) return 0.0;
  if (degenerate(tau_a, tau_b)) {
    const double tau = 0.5 * (tau_a + tau_b);
    return 1.0 - (1.0 + t / tau) * std::exp(-t / tau);
  }
  return 1.0 - (tau_a * std::exp(-t / tau_a) - tau_b * std::exp(-t / tau_b)) / (tau_a - tau_b);
}

void validate_model(const DetectorModel& m) {
  if (!(m.tau_tia > 0.0) || !(m.tau_h > 0.0) || !(m.tau_v > 0.0)) {
    throw Error("detector model: time constants must be positive");
  }
  if (m.delay_h < 0.0 || m.delay_v < 0.0) throw Error("detector model: delays must be nonnegative");
  if (!(m.gain > 0.0)) throw Error("detector model: gain must be positive");
}

SampledWaveform sampled_response(double tau_tia, double tau_x, double delay, const GridSpec& grid) {
  SampledWaveform h;
  h.samples.resize(grid.length);
  h.dt = grid.dt;
  h.t0 = 0.0;
  h.unit = Unit::dimensionless;
  // Cell-averaged sampling: the discrete sum times dt equals the analytic
  // integral up to the truncated tail, independent of how coarse dt is
  // relative to the fast pole.
  double prev = response_cdf(-delay, tau_tia, tau_x);
  for (std::size_t i = 0; i < grid.length; ++i) {
    const double t_hi = grid.dt * static_cast<double>(i + 1) - delay;
    const double next = response_cdf(t_hi, tau_tia, tau_x);
    h.samples[i] = (next - prev) / grid.dt;
    prev = next;
  }
  return h;
}

}  // namespace

SampledWaveform impulse_response(const DetectorModel& m, Photodiode which, const GridSpec& grid) {
  validate_model(m);
  if (!(grid.dt > 0.0) || grid.length < 2) throw Error("impulse_response: invalid grid");
  const double tau_x = arm_tau(m, which);
  const double span = grid.dt * static_cast<double>(grid.length);
  const double needed = 10.0 * std::max(m.tau_tia, tau_x) + arm_delay(m, which);
  if (span < needed) {
    throw Error("impulse_response: grid must span at least 10x the largest time constant");
  }
  return sampled_response(m.tau_tia, tau_x, arm_delay(m, which), grid);
}

std::pair<SampledWaveform, SampledWaveform> sum_diff_responses(const DetectorModel& m, const GridSpec& grid) {
  const SampledWaveform hh = impulse_response(m, Photodiode::H, grid);
  const SampledWaveform hv = impulse_response(m, Photodiode::V, grid);
  SampledWaveform sum = hh;
  SampledWaveform diff = hh;
  for (std::size_t i = 0; i < grid.length; ++i) {
    sum.samples[i] = hh.samples[i] + hv.samples[i];
    diff.samples[i] = hh.samples[i] - hv.samples[i];
  }
  return {sum, diff};
}

BalancedResponses balanced_responses(const DetectorModel& m, const GridSpec& grid) {
  auto [sum, diff] = sum_diff_responses(m, grid);
  BalancedResponses r;
  r.common_mode = std::move(diff);
  r.differential = std::move(sum);
  for (auto& s : r.common_mode.samples) s *= m.gain;
  for (auto& s : r.differential.samples) s *= m.gain;
  return r;
}

SampledWaveform detector_output(const DetectorModel& m, const SampledWaveform& flux_h,
                                const SampledWaveform& flux_v, const SampledWaveform* electronic_noise) {
  validate_model(m);
  if (flux_h.samples.size() != flux_v.samples.size()) throw Error("detector_output: flux grids differ in length");
  if (flux_h.samples.empty()) throw Error("detector_output: empty flux");
  if (!detail::close_rel(flux_h.dt, flux_v.dt, 1e-6)) throw Error("detector_output: flux grids differ in dt");
  if (std::abs(flux_h.t0 - flux_v.t0) > 1e-6 * flux_h.dt) throw Error("detector_output: flux grids differ in t0");
  for (double x : flux_h.samples) {
    if (!(x >= 0.0)) throw Error("detector_output: photon flux must be nonnegative");
  }
  for (double x : flux_v.samples) {
    if (!(x >= 0.0)) throw Error("detector_output: photon flux must be nonnegative");
  }

  const double max_tau = std::max({m.tau_tia, m.tau_h, m.tau_v});
  const double span = kResponseSpanTaus * max_tau + std::max(m.delay_h, m.delay_v);
  const std::size_t hlen = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(span / flux_h.dt)) + 1);
  const GridSpec grid{flux_h.dt, hlen};

  const SampledWaveform vh = convolve(impulse_response(m, Photodiode::H, grid), flux_h);
  const SampledWaveform vv = convolve(impulse_response(m, Photodiode::V, grid), flux_v);

  SampledWaveform out;
  out.samples.resize(flux_h.samples.size());
  out.dt = flux_h.dt;
  out.t0 = flux_h.t0;
  out.unit = Unit::volts;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = m.gain * (vh.samples[i] - vv.samples[i]);
  }
  if (electronic_noise) {
    if (electronic_noise->samples.size() != out.samples.size() ||
        !detail::close_rel(electronic_noise->dt, out.dt, 1e-6)) {
      throw Error("detector_output: electronic noise record does not match the output grid");
    }
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += electronic_noise->samples[i];
  }
  return out;
}

namespace {

struct FitObjective {
  const SampledWaveform& p_fast;
  const SampledWaveform& p_slow;
  double delay;

  double operator()(double log_tau_tia, double log_tau_x) const {
    const double tau_a = std::exp(log_tau_tia);
    const double tau_b = std::exp(log_tau_x);
    const double span = kResponseSpanTaus * std::max(tau_a, tau_b) + delay;
    const std::size_t hlen =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(span / p_fast.dt)) + 1);
    const SampledWaveform h = sampled_response(tau_a, tau_b, delay, GridSpec{p_fast.dt, hlen});
    const SampledWaveform conv = convolve(p_fast, h);

    // Free amplitude: pulses are typically normalized, so fit the shape only.
    double num = 0.0, den = 0.0;
    const std::size_t n = p_slow.samples.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double c = i < conv.samples.size() ? conv.samples[i] : 0.0;
      num += c * p_slow.samples[i];
      den += c * c;
    }
    const double amp = den > 0.0 ? num / den : 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = i < conv.samples.size() ? conv.samples[i] : 0.0;
      const double r = amp * c - p_slow.samples[i];
      ss += r * r;
    }
    return ss / static_cast<double>(n);
  }
};

constexpr double kLogTauMin = -27.63;  // ~1e-12 s
constexpr double kLogTauMax = -6.91;   // ~1e-3 s

double clamp_log_tau(double x) { return std::clamp(x, kLogTauMin, kLogTauMax); }

}  // namespace

FitResult fit_response(const SampledWaveform& p_fast, const SampledWaveform& p_slow,
                       const DetectorModel& init, Photodiode which) {
  if (p_fast.samples.empty() || p_slow.samples.empty()) throw Error("fit_response: empty input");
  if (!detail::close_rel(p_fast.dt, p_slow.dt, 1e-6)) throw Error("fit_response: sample periods differ");
  validate_model(init);

  const FitObjective objective{p_fast, p_slow, arm_delay(init, which)};

  // Nelder-Mead in (log tau_tia, log tau_x); small, bounded, deterministic.
  using Point = std::array<double, 2>;
  auto eval = [&](const Point& p) { return objective(clamp_log_tau(p[0]), clamp_log_tau(p[1])); };

  Point x0{std::log(init.tau_tia), std::log(arm_tau(init, which))};
  std::array<Point, 3> simplex{Point{x0[0], x0[1]}, Point{x0[0] + 0.4, x0[1]}, Point{x0[0], x0[1] + 0.4}};
  std::array<double, 3> f{eval(simplex[0]), eval(simplex[1]), eval(simplex[2])};

  const int max_iter = 400;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    // Order best..worst.
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return f[a] < f[b]; });
    const Point best = simplex[idx[0]], mid = simplex[idx[1]], worst = simplex[idx[2]];
    const double fb = f[idx[0]], fm = f[idx[1]], fw = f[idx[2]];

    const double spread = std::max(std::abs(best[0] - worst[0]), std::abs(best[1] - worst[1]));
    if (spread < 1e-10) break;

    const Point centroid{0.5 * (best[0] + mid[0]), 0.5 * (best[1] + mid[1])};
    auto along = [&](double coef) {
      return Point{centroid[0] + coef * (centroid[0] - worst[0]), centroid[1] + coef * (centroid[1] - worst[1])};
    };

    Point candidate = along(1.0);  // reflection
    double fc = eval(candidate);
    if (fc < fb) {
      const Point expanded = along(2.0);
      const double fe = eval(expanded);
      if (fe < fc) {
        candidate = expanded;
        fc = fe;
      }
    } else if (fc >= fm) {
      const Point contracted = along(-0.5);
      const double fk = eval(contracted);
      if (fk < fw) {
        candidate = contracted;
        fc = fk;
      } else {
        // Shrink toward best.
        for (int k = 1; k < 3; ++k) {
          simplex[idx[k]] = Point{0.5 * (simplex[idx[k]][0] + best[0]), 0.5 * (simplex[idx[k]][1] + best[1])};
          f[idx[k]] = eval(simplex[idx[k]]);
        }
        continue;
      }
    }
    simplex[idx[2]] = candidate;
    f[idx[2]] = fc;
  }

  int best_i = 0;
  for (int k = 1; k < 3; ++k) {
    if (f[k] < f[best_i]) best_i = k;
  }
  double tau_a = std::exp(clamp_log_tau(simplex[best_i][0]));
  double tau_b = std::exp(clamp_log_tau(simplex[best_i][1]));
  if (tau_a < tau_b) std::swap(tau_a, tau_b);  // the model is symmetric in the two poles

  FitResult result;
  result.model = init;
  result.model.tau_tia = tau_a;
  if (which == Photodiode::H) {
    result.model.tau_h = tau_b;
  } else {
    result.model.tau_v = tau_b;
  }
  result.residual_rms = std::sqrt(f[best_i]);
  result.peak = *std::max_element(p_slow.samples.begin(), p_slow.samples.end(),
                                  [](double a, double b) { return std::abs(a) < std::abs(b); });
  result.iterations = iter;

  if (iter >= max_iter) {
    throw FitError("fit_response: no convergence within iteration budget", result);
  }
  return result;
}

std::string to_config_text(const DetectorModel& m) {
  std::ostringstream os;
  os << "detector.tau_tia = " << format_double(m.tau_tia) << "\n";
  os << "detector.tau_h = " << format_double(m.tau_h) << "\n";
  os << "detector.tau_v = " << format_double(m.tau_v) << "\n";
  os << "detector.gain = " << format_double(m.gain) << "\n";
  os << "detector.delay_h = " << format_double(m.delay_h) << "\n";
  os << "detector.delay_v = " << format_double(m.delay_v) << "\n";
  return os.str();
}

DetectorModel detector_from_config(const std::map<std::string, std::string>& kv) {
  DetectorModel m;
  m.tau_tia = get_double(kv, "detector.tau_tia", m.tau_tia);
  m.tau_h = get_double(kv, "detector.tau_h", m.tau_h);
  m.tau_v = get_double(kv, "detector.tau_v", m.tau_v);
  m.gain = get_double(kv, "detector.gain", m.gain);
  m.delay_h = get_double(kv, "detector.delay_h", m.delay_h);
  m.delay_v = get_double(kv, "detector.delay_v", m.delay_v);
  validate_model(m);
  return m;
}

}  // namespace pulserec
