#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pulserec/noise.hpp"
#include "pulserec/pattern.hpp"
#include "pulserec/signal.hpp"
#include "pulserec/wiener.hpp"

namespace pulserec {

enum class EstimatorKind { raw, wiener, optimal };

std::string to_string(EstimatorKind k);

/// Per-pulse weighting applied to the detector output: the estimate for a
/// window is sum weights[i] v[begin+i] dt * calibration.
struct EstimatorPattern {
  EstimatorKind kind = EstimatorKind::raw;
  SampledWaveform weights;
  double calibration = 1.0;  // converts volt-seconds to photon number
};

/// Flat weight over the nominal pulse interval inside a window of
/// window_length samples (the classic boxcar estimator), optionally
/// extended by ringdown_samples so the detector tail is captured too.
EstimatorPattern raw_pattern(const PulseTrainSpec& ts, std::size_t window_length,
                             std::size_t ringdown_samples = 0);
EstimatorPattern pattern_from_solution(const PatternSolution& sol, std::size_t window_length);
EstimatorPattern pattern_from_wiener(const WienerFilter& f, std::size_t window_length);

struct EstimateSeries {
  EstimatorKind kind = EstimatorKind::raw;
  double power = 0.0;            // watts
  std::vector<double> values;    // calibrated photon-number estimates, one per pulse
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// One window per repetition period, pulse centered, ring-down guard
/// checked against min_guard seconds on each side of the pulse.
std::vector<PulseWindow> segment_pulses(const SampledWaveform& v, const PulseTrainSpec& ts,
                                        double min_guard = 0.0);

EstimateSeries estimate_all(const SampledWaveform& v, const std::vector<PulseWindow>& windows,
                            const EstimatorPattern& pattern);

struct QuadraticFit {
  double a = 0.0;  // offset
  double b = 0.0;  // linear coefficient, per watt
  double c = 0.0;  // quadratic coefficient, per watt^2
  std::array<std::array<double, 3>, 3> cov{};
  double chi2_dof = 0.0;
};

struct LinearFit {
  double a = 0.0;
  double b = 0.0;
  std::array<std::array<double, 2>, 2> cov{};
  double chi2_dof = 0.0;
};

/// Weighted least squares of var = a + b P + c P^2 with variance-of-variance
/// weights (n - 1) / (2 var^2).
QuadraticFit fit_variance_vs_power(const std::vector<double>& powers, const std::vector<double>& variances,
                                   const std::vector<std::size_t>& n_pulses);
LinearFit fit_variance_vs_power_linear(const std::vector<double>& powers,
                                       const std::vector<double>& variances,
                                       const std::vector<std::size_t>& n_pulses);

/// F statistic of the quadratic model against the nested linear one.
double quad_vs_linear_f(const std::vector<double>& powers, const std::vector<double>& variances,
                        const std::vector<std::size_t>& n_pulses);

struct AngleNoise {
  double var_phi = 0.0;   // rad^2
  double ds_dphi = 0.0;   // photons per radian
};

/// var(phi) = var(S) / (dS/dphi)^2 in the small-angle regime.
AngleNoise angle_noise(const EstimateSeries& series, double ds_dphi);

/// Analytic derivative of the differential photon number with respect to
/// the rotation angle, 2 N cos(2 phi), at the train's operating point.
double ds_dphi_analytic(const PulseTrainSpec& ts, const NoiseSpec& ns);

double mean(const std::vector<double>& x);
double variance(const std::vector<double>& x);  // unbiased (n - 1)

}  // namespace pulserec
