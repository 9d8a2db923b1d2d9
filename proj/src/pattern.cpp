#include "pulserec/pattern.hpp"

#include <cmath>

namespace pulserec {

namespace {

void check_problem(const PatternProblem& p) {
  const std::size_t n = p.common_response.bins.size();
  auto check = [&](const Spectrum& s, const char* what) {
    if (s.bins.size() != n) throw Error(std::string("pattern problem: ") + what + " bin count differs");
    if (!s.two_sided) throw Error(std::string("pattern problem: ") + what + " must be two-sided");
    if (!detail::close_rel(s.domega, p.common_response.domega, 1e-6)) {
      throw Error(std::string("pattern problem: ") + what + " bin spacing differs");
    }
  };
  if (n < 2) throw Error("pattern problem: empty spectra");
  check(p.diff_response, "diff_response");
  check(p.pulse_spectrum, "pulse_spectrum");
  check(p.noise_psd, "noise_psd");
}

std::vector<double> floored_noise(const PatternProblem& p) {
  std::vector<double> den(p.noise_psd.bins.size());
  double peak = 0.0;
  for (std::size_t k = 0; k < den.size(); ++k) {
    den[k] = p.noise_psd.bins[k].real();
    peak = std::max(peak, den[k]);
  }
  if (!(peak > 0.0)) throw Error("pattern problem: noise PSD is identically zero");
  const double floor = peak * kNoiseFloorRel;
  for (double& d : den) d = std::max(d, floor);
  return den;
}

/// Hermitian-symmetrized spectral integral: pairs bin k with bin -k so the
/// result of integrating a Hermitian-symmetric integrand is real up to
/// rounding.
std::complex<double> symmetrized_integral(const std::vector<std::complex<double>>& f, double dnu) {
  const std::size_t n = f.size();
  std::complex<double> acc = f[0];
  if (n % 2 == 0) acc += f[n / 2];
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) {
    acc += 0.5 * (f[k] + std::conj(f[n - k]));
    acc += 0.5 * (f[n - k] + std::conj(f[k]));
  }
  return acc * dnu;
}

}  // namespace

std::complex<double> constraint_orthogonality(const Spectrum& g, const PatternProblem& prob) {
  check_problem(prob);
  if (g.bins.size() != prob.common_response.bins.size() ||
      !detail::close_rel(g.domega, prob.common_response.domega, 1e-6)) {
    throw Error("constraint_orthogonality: filter grid does not match the problem");
  }
  std::vector<std::complex<double>> integrand(g.bins.size());
  for (std::size_t k = 0; k < g.bins.size(); ++k) {
    integrand[k] = std::conj(g.bins[k]) * prob.common_response.bins[k] * prob.pulse_spectrum.bins[k];
  }
  return symmetrized_integral(integrand, g.dnu());
}

std::complex<double> constraint_calibration(const Spectrum& g, const PatternProblem& prob) {
  check_problem(prob);
  if (g.bins.size() != prob.diff_response.bins.size() ||
      !detail::close_rel(g.domega, prob.diff_response.domega, 1e-6)) {
    throw Error("constraint_calibration: filter grid does not match the problem");
  }
  std::vector<std::complex<double>> integrand(g.bins.size());
  for (std::size_t k = 0; k < g.bins.size(); ++k) {
    integrand[k] = std::conj(g.bins[k]) * prob.diff_response.bins[k] * prob.pulse_spectrum.bins[k];
  }
  return symmetrized_integral(integrand, g.dnu());
}

double noise_power(const Spectrum& g, const PatternProblem& prob) {
  check_problem(prob);
  if (g.bins.size() != prob.noise_psd.bins.size()) throw Error("noise_power: filter grid does not match");
  const std::vector<double> den = floored_noise(prob);
  double acc = 0.0;
  for (std::size_t k = 0; k < g.bins.size(); ++k) acc += std::norm(g.bins[k]) * den[k];
  return acc * g.dnu();
}

PatternSolution solve_pattern(const PatternProblem& prob) {
  check_problem(prob);
  if (std::abs(prob.pulse_spectrum.bins[0].real() - prob.pulse_dc) >
      1e-9 * std::max(std::abs(prob.pulse_dc), 1e-300)) {
    throw Error("solve_pattern: pulse_dc does not match the zero-frequency pulse bin");
  }

  const std::size_t n = prob.common_response.bins.size();
  const double dnu = prob.common_response.dnu();
  const std::vector<double> den = floored_noise(prob);

  // Constraint directions: a = common x pulse (orthogonality),
  // b = diff x pulse (calibration).
  std::vector<std::complex<double>> a(n), b(n);
  double norm_b2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    a[k] = prob.common_response.bins[k] * prob.pulse_spectrum.bins[k];
    b[k] = prob.diff_response.bins[k] * prob.pulse_spectrum.bins[k];
    norm_b2 += std::norm(b[k]);
  }
  if (!(norm_b2 > 0.0)) {
    throw Error("solve_pattern: differential response is identically zero; calibration is infeasible");
  }

  auto gram_entry = [&](const std::vector<std::complex<double>>& u,
                        const std::vector<std::complex<double>>& v) {
    std::vector<std::complex<double>> integrand(n);
    for (std::size_t k = 0; k < n; ++k) integrand[k] = std::conj(u[k]) * v[k] / den[k];
    return symmetrized_integral(integrand, dnu);
  };

  // Whitened Gram matrix; Hermitian inputs make all entries real.
  const std::complex<double> oo_c = gram_entry(a, a);
  const std::complex<double> oc_c = gram_entry(b, a);
  const std::complex<double> co_c = gram_entry(a, b);
  const std::complex<double> cc_c = gram_entry(b, b);

  GramMatrix gram;
  gram.oo = oo_c.real();
  gram.oc = oc_c.real();
  gram.co = co_c.real();
  gram.cc = cc_c.real();

  const double scale = std::max(gram.oo * gram.cc, gram.oc * gram.co);
  const double det = gram.co * gram.oc - gram.cc * gram.oo;  // <= 0 by Cauchy-Schwarz
  if (std::abs(det) <= kSingularRel * std::max(scale, 1e-300)) {
    throw Error(
        "solve_pattern: constraint directions are degenerate (detector arms too similar or "
        "pathological noise)");
  }

  PatternSolution sol;
  sol.gram = gram;
  sol.lambda_orth = prob.pulse_dc * gram.oc / det;
  sol.lambda_cal = prob.pulse_dc * gram.oo / (-det);

  Spectrum g;
  g.bins.resize(n);
  g.domega = prob.common_response.domega;
  g.two_sided = true;
  g.n_time = n;  // the filter lives on the whole padded window grid
  g.dt = prob.common_response.dt;
  g.unit = Unit::dimensionless;
  for (std::size_t k = 0; k < n; ++k) {
    g.bins[k] = (sol.lambda_orth * a[k] + sol.lambda_cal * b[k]) / den[k];
  }
  sol.filter_spectrum = g;

  double imag_fraction = 0.0;
  sol.filter_time = ifft(g, &imag_fraction);
  sol.discarded_imag_fraction = imag_fraction;

  // Residual diagnostics, normalized as |I| / (||G|| ||direction||).
  const std::complex<double> i_or = constraint_orthogonality(g, prob);
  const std::complex<double> i_cal = constraint_calibration(g, prob);
  double g_norm2 = 0.0, a_norm2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    g_norm2 += std::norm(g.bins[k]);
    a_norm2 += std::norm(a[k]);
  }
  const double denom_or = std::sqrt(g_norm2 * dnu) * std::sqrt(a_norm2 * dnu);
  sol.orth_residual = denom_or > 0.0 ? std::abs(i_or) / denom_or : std::abs(i_or);
  sol.cal_residual =
      std::abs(prob.pulse_dc) > 0.0 ? std::abs(i_cal - prob.pulse_dc) / std::abs(prob.pulse_dc) : std::abs(i_cal);
  sol.noise_power = noise_power(g, prob);
  return sol;
}

}  // namespace pulserec
