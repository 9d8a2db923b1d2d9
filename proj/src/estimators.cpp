#include "pulserec/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace pulserec {

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::raw: return "raw";
    case EstimatorKind::wiener: return "wiener";
    case EstimatorKind::optimal: return "optimal";
  }
  return "raw";
}

double mean(const std::vector<double>& x) {
  if (x.empty()) throw Error("mean: empty sample");
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

double variance(const std::vector<double>& x) {
  if (x.size() < 2) throw Error("variance: need at least two samples");
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size() - 1);
}

std::vector<PulseWindow> segment_pulses(const SampledWaveform& v, const PulseTrainSpec& ts,
                                        double min_guard) {
  if (v.samples.empty()) throw Error("segment_pulses: empty waveform");
  if (ts.duty_cycle >= 1.0 && min_guard > 0.0) throw Error("segment_pulses: pulses overlap after margin");
  const std::size_t per = ts.samples_per_period();
  const std::size_t width = ts.samples_per_pulse();
  const std::size_t lead = ts.lead_samples();
  const double guard = static_cast<double>(lead) * ts.dt;
  if (guard < min_guard) {
    throw Error("segment_pulses: inter-pulse gap does not cover the requested ring-down margin");
  }
  (void)width;

  std::vector<PulseWindow> windows;
  windows.reserve(ts.n_pulses);
  for (std::size_t j = 0; j < ts.n_pulses; ++j) {
    const PulseWindow w{j * per, (j + 1) * per};
    if (w.end > v.samples.size()) break;
    windows.push_back(w);
  }
  if (windows.empty()) throw Error("segment_pulses: waveform shorter than one pulse period");
  return windows;
}

EstimatorPattern raw_pattern(const PulseTrainSpec& ts, std::size_t window_length,
                             std::size_t ringdown_samples) {
  const std::size_t width = ts.samples_per_pulse();
  const std::size_t lead = ts.lead_samples();
  if (lead + width > window_length) throw Error("raw_pattern: window shorter than the pulse");
  const std::size_t stop = std::min(window_length, lead + width + ringdown_samples);
  EstimatorPattern p;
  p.kind = EstimatorKind::raw;
  p.weights.samples.assign(window_length, 0.0);
  p.weights.dt = ts.dt;
  for (std::size_t i = lead; i < stop; ++i) p.weights.samples[i] = 1.0;
  return p;
}

EstimatorPattern pattern_from_solution(const PatternSolution& sol, std::size_t window_length) {
  EstimatorPattern p;
  p.kind = EstimatorKind::optimal;
  p.weights = sol.filter_time;
  if (p.weights.samples.size() > window_length) p.weights.samples.resize(window_length);
  return p;
}

EstimatorPattern pattern_from_wiener(const WienerFilter& f, std::size_t window_length) {
  EstimatorPattern p;
  p.kind = EstimatorKind::wiener;
  p.weights = f.weights_time;
  if (p.weights.samples.size() > window_length) p.weights.samples.resize(window_length);
  return p;
}

EstimateSeries estimate_all(const SampledWaveform& v, const std::vector<PulseWindow>& windows,
                            const EstimatorPattern& pattern) {
  if (windows.empty()) throw Error("estimate_all: no windows");
  if (!detail::close_rel(pattern.weights.dt, v.dt, 1e-6)) {
    throw Error("estimate_all: pattern grid does not match the waveform");
  }
  EstimateSeries out;
  out.kind = pattern.kind;
  out.values.reserve(windows.size());
  const std::vector<double>& w = pattern.weights.samples;
  for (const PulseWindow& win : windows) {
    if (win.end > v.samples.size()) throw Error("estimate_all: window outside waveform");
    const std::size_t n = std::min(win.size(), w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * v.samples[win.begin + i];
    out.values.push_back(acc * v.dt * pattern.calibration);
  }
  return out;
}

namespace {

void check_fit_inputs(const std::vector<double>& powers, const std::vector<double>& variances,
                      const std::vector<std::size_t>& n_pulses, std::size_t min_points) {
  if (powers.size() != variances.size() || powers.size() != n_pulses.size()) {
    throw Error("variance fit: input arrays differ in length");
  }
  if (powers.size() < min_points) throw Error("variance fit: need at least 4 power points");
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (!(variances[i] > 0.0)) throw Error("variance fit: variances must be positive");
    if (n_pulses[i] < 2) throw Error("variance fit: need at least 2 pulses per point");
  }
}

/// Solves the 3x3 (or 2x2) weighted normal equations; returns false when
/// singular.
template <std::size_t Dim>
bool solve_normal(const std::array<std::array<double, Dim>, Dim>& m, const std::array<double, Dim>& rhs,
                  std::array<double, Dim>& x, std::array<std::array<double, Dim>, Dim>& inv) {
  // Gauss-Jordan with partial pivoting on the augmented [m | I].
  std::array<std::array<double, 2 * Dim>, Dim> aug{};
  for (std::size_t i = 0; i < Dim; ++i) {
    for (std::size_t j = 0; j < Dim; ++j) aug[i][j] = m[i][j];
    aug[i][Dim + i] = 1.0;
  }
  for (std::size_t col = 0; col < Dim; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < Dim; ++r) {
      if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
    }
    if (std::abs(aug[piv][col]) < 1e-300) return false;
    std::swap(aug[piv], aug[col]);
    const double d = aug[col][col];
    for (auto& v : aug[col]) v /= d;
    for (std::size_t r = 0; r < Dim; ++r) {
      if (r == col) continue;
      const double f = aug[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < 2 * Dim; ++j) aug[r][j] -= f * aug[col][j];
    }
  }
  for (std::size_t i = 0; i < Dim; ++i) {
    for (std::size_t j = 0; j < Dim; ++j) inv[i][j] = aug[i][Dim + j];
  }
  for (std::size_t i = 0; i < Dim; ++i) {
    x[i] = 0.0;
    for (std::size_t j = 0; j < Dim; ++j) x[i] += inv[i][j] * rhs[j];
  }
  return true;
}

double fit_weight(double var, std::size_t n) {
  // Inverse variance of the sample variance for near-Gaussian estimates.
  return static_cast<double>(n - 1) / (2.0 * var * var);
}

}  // namespace

QuadraticFit fit_variance_vs_power(const std::vector<double>& powers, const std::vector<double>& variances,
                                   const std::vector<std::size_t>& n_pulses) {
  check_fit_inputs(powers, variances, n_pulses, 4);
  std::array<std::array<double, 3>, 3> m{};
  std::array<double, 3> rhs{};
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double w = fit_weight(variances[i], n_pulses[i]);
    const double p = powers[i];
    const std::array<double, 3> basis{1.0, p, p * p};
    for (std::size_t r = 0; r < 3; ++r) {
      rhs[r] += w * basis[r] * variances[i];
      for (std::size_t c = 0; c < 3; ++c) m[r][c] += w * basis[r] * basis[c];
    }
  }
  std::array<double, 3> x{};
  QuadraticFit fit;
  if (!solve_normal<3>(m, rhs, x, fit.cov)) throw Error("variance fit: singular normal equations");
  fit.a = x[0];
  fit.b = x[1];
  fit.c = x[2];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double w = fit_weight(variances[i], n_pulses[i]);
    const double p = powers[i];
    const double r = variances[i] - (fit.a + fit.b * p + fit.c * p * p);
    chi2 += w * r * r;
  }
  const double dof = static_cast<double>(powers.size()) - 3.0;
  fit.chi2_dof = dof > 0.0 ? chi2 / dof : 0.0;
  return fit;
}

LinearFit fit_variance_vs_power_linear(const std::vector<double>& powers,
                                       const std::vector<double>& variances,
                                       const std::vector<std::size_t>& n_pulses) {
  check_fit_inputs(powers, variances, n_pulses, 4);
  std::array<std::array<double, 2>, 2> m{};
  std::array<double, 2> rhs{};
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double w = fit_weight(variances[i], n_pulses[i]);
    const double p = powers[i];
    const std::array<double, 2> basis{1.0, p};
    for (std::size_t r = 0; r < 2; ++r) {
      rhs[r] += w * basis[r] * variances[i];
      for (std::size_t c = 0; c < 2; ++c) m[r][c] += w * basis[r] * basis[c];
    }
  }
  std::array<double, 2> x{};
  LinearFit fit;
  if (!solve_normal<2>(m, rhs, x, fit.cov)) throw Error("variance fit: singular normal equations");
  fit.a = x[0];
  fit.b = x[1];
  double chi2 = 0.0;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    const double w = fit_weight(variances[i], n_pulses[i]);
    const double r = variances[i] - (fit.a + fit.b * powers[i]);
    chi2 += w * r * r;
  }
  const double dof = static_cast<double>(powers.size()) - 2.0;
  fit.chi2_dof = dof > 0.0 ? chi2 / dof : 0.0;
  return fit;
}

double quad_vs_linear_f(const std::vector<double>& powers, const std::vector<double>& variances,
                        const std::vector<std::size_t>& n_pulses) {
  const QuadraticFit q = fit_variance_vs_power(powers, variances, n_pulses);
  const LinearFit l = fit_variance_vs_power_linear(powers, variances, n_pulses);
  auto chi2 = [&](auto predict) {
    double acc = 0.0;
    for (std::size_t i = 0; i < powers.size(); ++i) {
      const double w = fit_weight(variances[i], n_pulses[i]);
      const double r = variances[i] - predict(powers[i]);
      acc += w * r * r;
    }
    return acc;
  };
  const double chi2_l = chi2([&](double p) { return l.a + l.b * p; });
  const double chi2_q = chi2([&](double p) { return q.a + q.b * p + q.c * p * p; });
  const double dof_q = static_cast<double>(powers.size()) - 3.0;
  if (dof_q <= 0.0 || chi2_q <= 0.0) return 0.0;
  return (chi2_l - chi2_q) / (chi2_q / dof_q);
}

AngleNoise angle_noise(const EstimateSeries& series, double ds_dphi) {
  if (ds_dphi == 0.0) throw Error("angle_noise: zero derivative");
  AngleNoise out;
  out.ds_dphi = ds_dphi;
  out.var_phi = variance(series.values) / (ds_dphi * ds_dphi);
  return out;
}

double ds_dphi_analytic(const PulseTrainSpec& ts, const NoiseSpec& ns) {
  return 2.0 * ts.photons_per_pulse(ns) * std::cos(2.0 * ts.rotation_angle);
}

}  // namespace pulserec
