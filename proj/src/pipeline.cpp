#include "pulserec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

#include "pulserec/config.hpp"
#include "pulserec/trace_io.hpp"
#include "pulserec/version.hpp"

namespace pulserec {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kOrderingMinPower = 100e-6;  // watts; estimator-ordering analysis threshold

namespace stream {
constexpr std::uint64_t kElectronicTrain = 90;
constexpr std::uint64_t kNoisyTrain = 100;
constexpr std::uint64_t kCleanTrain = 101;
constexpr std::uint64_t kWienerTrain = 102;
}  // namespace stream

template <typename F>
auto with_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(std::string("stage ") + stage + ": " + e.what());
  }
}

Spectrum fold_one_sided(const Spectrum& two_sided) {
  const std::size_t n = two_sided.bins.size();
  Spectrum s = two_sided;
  s.two_sided = false;
  s.bins.resize(n / 2 + 1);
  s.bins[0] = two_sided.bins[0].real();
  s.bins[n / 2] = two_sided.bins[n / 2].real();
  for (std::size_t k = 1; k < n / 2; ++k) {
    s.bins[k] = two_sided.bins[k].real() + two_sided.bins[n - k].real();
  }
  return s;
}

double se_of_variance(double var, std::size_t n) {
  return var * std::sqrt(2.0 / static_cast<double>(n - 1));
}

}  // namespace

std::vector<double> ExperimentConfig::sweep_powers() const {
  if (!(sweep_step > 0.0)) throw Error("sweep: step must be positive");
  if (sweep_stop < sweep_start) throw Error("sweep: stop below start");
  std::vector<double> powers;
  for (double p = sweep_start; p <= sweep_stop * (1.0 + 1e-12) + 1e-18; p += sweep_step) {
    powers.push_back(p);
  }
  if (powers.empty()) throw Error("sweep: empty power list");
  return powers;
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream os;
  os << to_config_text(train);
  os << to_config_text(noise);
  os << to_config_text(detector);
  os << "sweep.start = " << format_double(sweep_start) << "\n";
  os << "sweep.stop = " << format_double(sweep_stop) << "\n";
  os << "sweep.step = " << format_double(sweep_step) << "\n";
  os << "estimators.raw = " << (estimator_raw ? 1 : 0) << "\n";
  os << "estimators.wiener = " << (estimator_wiener ? 1 : 0) << "\n";
  os << "estimators.optimal = " << (estimator_optimal ? 1 : 0) << "\n";
  os << "technical_noise = " << (technical_noise ? 1 : 0) << "\n";
  os << "reference_rotation = " << format_double(reference_rotation) << "\n";
  os << "wiener_train_pulses = " << wiener_train_pulses << "\n";
  os << "smooth_bins = " << smooth_bins << "\n";
  os << "char_segment = " << char_segment << "\n";
  os << "char_overlap = " << format_double(char_overlap) << "\n";
  os << "seed = " << seed << "\n";
  return os.str();
}

std::string ExperimentConfig::hash() const { return config_hash(parse_config_text(canonical_text())); }

ExperimentConfig experiment_from_config(const std::map<std::string, std::string>& kv) {
  static const std::set<std::string> known = {
      "train.n_pulses", "train.pulse_width", "train.duty_cycle", "train.mean_power",
      "train.rotation_angle", "train.dt",
      "noise.electronic_psd", "noise.tech_center_freq", "noise.tech_fwhm",
      "noise.tech_relative_depth", "noise.tech_imbalance", "noise.shot_scale", "noise.seed",
      "detector.tau_tia", "detector.tau_h", "detector.tau_v", "detector.gain",
      "detector.delay_h", "detector.delay_v",
      "sweep.start", "sweep.stop", "sweep.step",
      "estimators.raw", "estimators.wiener", "estimators.optimal",
      "technical_noise", "reference_rotation", "wiener_train_pulses",
      "smooth_bins", "char_segment", "char_overlap", "output_dir", "seed", "jobs"};
  reject_unknown_keys(kv, known);

  ExperimentConfig cfg;
  cfg.train = train_from_config(kv);
  cfg.noise = noise_from_config(kv);
  cfg.detector = detector_from_config(kv);
  cfg.sweep_start = get_double(kv, "sweep.start", cfg.sweep_start);
  cfg.sweep_stop = get_double(kv, "sweep.stop", cfg.sweep_stop);
  cfg.sweep_step = get_double(kv, "sweep.step", cfg.sweep_step);
  cfg.estimator_raw = get_u64(kv, "estimators.raw", cfg.estimator_raw ? 1 : 0) != 0;
  cfg.estimator_wiener = get_u64(kv, "estimators.wiener", cfg.estimator_wiener ? 1 : 0) != 0;
  cfg.estimator_optimal = get_u64(kv, "estimators.optimal", cfg.estimator_optimal ? 1 : 0) != 0;
  cfg.technical_noise = get_u64(kv, "technical_noise", cfg.technical_noise ? 1 : 0) != 0;
  cfg.reference_rotation = get_double(kv, "reference_rotation", cfg.reference_rotation);
  cfg.wiener_train_pulses = get_u64(kv, "wiener_train_pulses", cfg.wiener_train_pulses);
  cfg.smooth_bins = get_u64(kv, "smooth_bins", cfg.smooth_bins);
  cfg.char_segment = get_u64(kv, "char_segment", cfg.char_segment);
  cfg.char_overlap = get_double(kv, "char_overlap", cfg.char_overlap);
  cfg.output_dir = get_string(kv, "output_dir", cfg.output_dir);
  cfg.seed = get_u64(kv, "seed", cfg.seed);
  cfg.jobs = static_cast<int>(get_u64(kv, "jobs", 1));
  // Master seed drives every stream; the noise spec's own seed is derived.
  cfg.noise.seed = cfg.seed;
  if (!(cfg.reference_rotation > 0.0)) throw Error("reference_rotation must be positive");
  if (cfg.wiener_train_pulses < 10) throw Error("wiener_train_pulses must be at least 10");
  return cfg;
}

ExperimentConfig experiment_from_file(const std::string& path) {
  return experiment_from_config(parse_config_file(path));
}

Characterization characterize(const ExperimentConfig& cfg, double power,
                              const SampledWaveform* trace_with_tech,
                              const SampledWaveform* trace_no_tech,
                              const SampledWaveform* trace_electronic) {
  PulseTrainSpec ts = cfg.train;
  ts.mean_power = power;

  NoiseSpec ns_tech = cfg.noise;
  if (!cfg.technical_noise) ns_tech.tech_relative_depth = 0.0;
  NoiseSpec ns_clean = ns_tech;
  ns_clean.tech_relative_depth = 0.0;

  SampledWaveform synth_with, synth_without, synth_el;
  const SampledWaveform* with_tech = trace_with_tech;
  const SampledWaveform* no_tech = trace_no_tech;
  const SampledWaveform* electronic = trace_electronic;
  if (!with_tech) {
    NoiseSpec ns = ns_tech;
    ns.seed = split_seed(cfg.seed, stream::kNoisyTrain, 0xC0FFEE);
    synth_with = generate_train(ts, ns, cfg.detector).v_out;
    with_tech = &synth_with;
  }
  if (!no_tech) {
    NoiseSpec ns = ns_clean;
    ns.seed = split_seed(cfg.seed, stream::kCleanTrain, 0xC0FFEE);
    synth_without = generate_train(ts, ns, cfg.detector).v_out;
    no_tech = &synth_without;
  }
  if (!electronic) {
    PulseTrainSpec dark = ts;
    dark.mean_power = 0.0;
    NoiseSpec ns = ns_clean;
    ns.seed = split_seed(cfg.seed, stream::kElectronicTrain, 0xC0FFEE);
    synth_el = generate_train(dark, ns, cfg.detector).v_out;
    electronic = &synth_el;
  }

  const Spectrum psd_with = welch_psd(*with_tech, cfg.char_segment, cfg.char_overlap, false);
  const Spectrum psd_no = welch_psd(*no_tech, cfg.char_segment, cfg.char_overlap, false);
  const Spectrum psd_el = welch_psd(*electronic, cfg.char_segment, cfg.char_overlap, false);

  const double rep_rate = 1.0 / ts.period();
  Characterization out;
  out.params = extract_noise_params(psd_with, psd_no, psd_el, rep_rate, cfg.smooth_bins);
  out.psd_with_tech = fold_one_sided(psd_with);
  out.psd_no_tech = fold_one_sided(psd_no);
  out.psd_electronic = fold_one_sided(psd_el);

  // Pattern problem on the per-pulse window grid.
  const std::size_t window = ts.samples_per_period();
  const std::size_t padded = next_pow2(window);
  const GridSpec grid{ts.dt, padded};
  const BalancedResponses resp = balanced_responses(cfg.detector, grid);

  PatternProblem prob;
  prob.common_response = fft(resp.common_mode);
  prob.diff_response = fft(resp.differential);
  prob.pulse_spectrum = fft(mean_pulse_flux(ts, ns_tech, padded));
  const double target_domega = prob.common_response.domega;
  const Spectrum tech_psd = resample_psd(out.params.technical, target_domega, padded, true);
  const Spectrum el_psd = resample_psd(out.params.electronic, target_domega, padded, true);
  prob.noise_psd = tech_psd;
  for (std::size_t k = 0; k < padded; ++k) {
    prob.noise_psd.bins[k] = tech_psd.bins[k].real() + el_psd.bins[k].real();
  }
  prob.pulse_dc = prob.pulse_spectrum.bins[0].real();
  out.problem = std::move(prob);
  return out;
}

PowerCell run_power_cell(const ExperimentConfig& cfg, std::size_t power_index,
                         const SampledWaveform& electronic_train) {
  const std::vector<double> powers = cfg.sweep_powers();
  const double power = powers.at(power_index);

  PulseTrainSpec ts = cfg.train;
  ts.mean_power = power;

  NoiseSpec ns_tech = cfg.noise;
  if (!cfg.technical_noise) ns_tech.tech_relative_depth = 0.0;
  NoiseSpec ns_clean = ns_tech;
  ns_clean.tech_relative_depth = 0.0;

  PowerCell cell;
  cell.power = power;
  cell.ds_dphi = ds_dphi_analytic(ts, ns_tech);

  const double guard = 5.0 * cfg.detector.tau_tia;
  const std::size_t window = ts.samples_per_period();
  const std::size_t ringdown = static_cast<std::size_t>(std::ceil(guard / ts.dt));

  // Measurement trains.
  NoiseSpec ns_meas = ns_tech;
  ns_meas.seed = split_seed(cfg.seed, stream::kNoisyTrain, power_index);
  NoiseSpec ns_meas_clean = ns_clean;
  ns_meas_clean.seed = split_seed(cfg.seed, stream::kCleanTrain, power_index);
  const GeneratedTrain noisy = with_stage("generate", [&] { return generate_train(ts, ns_meas, cfg.detector); });
  const GeneratedTrain clean =
      with_stage("generate", [&] { return generate_train(ts, ns_meas_clean, cfg.detector); });
  const std::vector<PulseWindow> windows = segment_pulses(noisy.v_out, ts, guard);

  // Noise characterization and the solved pattern (needs light).
  std::optional<Characterization> charz;
  if (power > 0.0) {
    charz = with_stage("characterize",
                       [&] { return characterize(cfg, power, nullptr, nullptr, &electronic_train); });
    cell.psd_with_tech = charz->psd_with_tech;
    cell.psd_no_tech = charz->psd_no_tech;
    cell.psd_electronic = charz->psd_electronic;
    cell.shot_level = charz->params.shot_level;
  }

  if (cfg.estimator_optimal && power > 0.0) {
    cell.pattern = with_stage("solve-pattern", [&] { return solve_pattern(charz->problem); });
  }

  // Reference-rotation products: calibration target and the Wiener filter.
  PulseTrainSpec ts_ref = ts;
  ts_ref.rotation_angle = cfg.reference_rotation;
  const double s_ref = ts.photons_per_pulse(ns_tech) * std::sin(2.0 * cfg.reference_rotation);

  std::optional<SampledWaveform> cal_output;
  std::vector<PulseWindow> cal_windows;
  if (power > 0.0) {
    PulseTrainSpec ts_cal = ts_ref;
    ts_cal.n_pulses = 8;
    cal_output = mean_detector_output(ts_cal, ns_tech, cfg.detector);
    cal_windows = segment_pulses(*cal_output, ts_cal, guard);
    cal_windows.erase(cal_windows.begin());  // first period lacks its predecessor's tail
  }

  if (cfg.estimator_wiener && power > 0.0) {
    cell.wiener = with_stage("wiener", [&] {
      PulseTrainSpec ts_train = ts_ref;
      ts_train.n_pulses = cfg.wiener_train_pulses;
      NoiseSpec ns_w = ns_tech;
      ns_w.seed = split_seed(cfg.seed, stream::kWienerTrain, power_index);
      const GeneratedTrain wtrain = generate_train(ts_train, ns_w, cfg.detector);
      std::vector<PulseWindow> wwin = segment_pulses(wtrain.v_out, ts_train, guard);
      wwin.erase(wwin.begin());
      const Spectrum ideal_fft = fft(slice(*cal_output, cal_windows.front()));
      const EnsembleSpectra ens = ensemble_spectra(ideal_fft, wtrain.v_out, wwin);
      return wiener_filter(ens.auto_psd, ens.cross);
    });
  }

  // Calibrate each selected estimator on the noise-free reference run, then
  // evaluate on the measurement trains.
  auto calibrated = [&](EstimatorPattern pattern) {
    EstimateSeries ref = estimate_all(*cal_output, cal_windows, pattern);
    const double m = mean(ref.values);
    if (m == 0.0) throw Error("calibration: estimator reads zero on the reference run");
    pattern.calibration = s_ref / m;
    return pattern;
  };
  auto add_series = [&](const std::string& key, const GeneratedTrain& train, const EstimatorPattern& pattern,
                        std::uint64_t seed) {
    EstimateSeries s = estimate_all(train.v_out, windows, pattern);
    s.power = power;
    s.seed = seed;
    s.config_hash = cfg.hash();
    cell.series[key] = std::move(s);
  };

  with_stage("estimate", [&] {
    if (cfg.estimator_raw) {
      EstimatorPattern raw = raw_pattern(ts, window, ringdown);
      if (power > 0.0) {
        raw = calibrated(raw);
      } else {
        raw.calibration = 1.0 / cfg.detector.gain;  // no light: volt-seconds to photons directly
      }
      add_series("raw_noisy", noisy, raw, ns_meas.seed);
      add_series("raw_clean", clean, raw, ns_meas_clean.seed);
    }
    if (cfg.estimator_optimal && cell.pattern) {
      const EstimatorPattern opt = calibrated(pattern_from_solution(*cell.pattern, window));
      add_series("optimal_noisy", noisy, opt, ns_meas.seed);
      add_series("optimal_clean", clean, opt, ns_meas_clean.seed);
    }
    if (cfg.estimator_wiener && cell.wiener) {
      const EstimatorPattern wie = calibrated(pattern_from_wiener(*cell.wiener, window));
      add_series("wiener_noisy", noisy, wie, ns_meas.seed);
    }
  });
  return cell;
}

namespace {

struct SeriesStats {
  std::vector<double> powers;
  std::vector<double> variances;
  std::vector<double> se;
  std::vector<std::size_t> n;
  std::vector<double> var_phi;
};

SeriesStats collect(const std::vector<PowerCell>& cells, const std::string& key) {
  SeriesStats s;
  for (const auto& cell : cells) {
    const auto it = cell.series.find(key);
    if (it == cell.series.end()) continue;
    const double var = variance(it->second.values);
    s.powers.push_back(cell.power);
    s.variances.push_back(var);
    s.se.push_back(se_of_variance(var, it->second.values.size()));
    s.n.push_back(it->second.values.size());
    s.var_phi.push_back(cell.ds_dphi > 0.0 ? var / (cell.ds_dphi * cell.ds_dphi) : 0.0);
  }
  return s;
}

ordered_json fit_json(const SeriesStats& s) {
  ordered_json j;
  if (s.powers.size() < 4) return j;
  const QuadraticFit q = fit_variance_vs_power(s.powers, s.variances, s.n);
  const LinearFit l = fit_variance_vs_power_linear(s.powers, s.variances, s.n);
  j["quadratic"] = {{"a", q.a},
                    {"b", q.b},
                    {"c", q.c},
                    {"sigma_a", std::sqrt(q.cov[0][0])},
                    {"sigma_b", std::sqrt(q.cov[1][1])},
                    {"sigma_c", std::sqrt(q.cov[2][2])},
                    {"chi2_dof", q.chi2_dof}};
  j["linear"] = {{"a", l.a},
                 {"b", l.b},
                 {"sigma_a", std::sqrt(l.cov[0][0])},
                 {"sigma_b", std::sqrt(l.cov[1][1])},
                 {"chi2_dof", l.chi2_dof}};
  j["f_quad_vs_linear"] = quad_vs_linear_f(s.powers, s.variances, s.n);
  return j;
}

void write_text_file(const std::string& path, const std::string& text, std::vector<std::string>& written) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open output file: " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
  written.push_back(path);
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
  const std::vector<double> powers = cfg.sweep_powers();
  const std::string hash = cfg.hash();

  // The dark acquisition does not depend on power; share it across cells.
  PulseTrainSpec dark = cfg.train;
  dark.mean_power = 0.0;
  NoiseSpec ns_dark = cfg.noise;
  ns_dark.seed = split_seed(cfg.seed, stream::kElectronicTrain, 0);
  const SampledWaveform electronic_train =
      with_stage("generate", [&] { return generate_train(dark, ns_dark, cfg.detector).v_out; });

  std::vector<PowerCell> cells(powers.size());
  const int jobs = std::max(1, cfg.jobs);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < powers.size(); ++i) cells[i] = run_power_cell(cfg, i, electronic_train);
  } else {
    std::vector<std::future<PowerCell>> futures(powers.size());
    std::size_t next = 0;
    while (next < powers.size()) {
      const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(jobs), powers.size() - next);
      for (std::size_t k = 0; k < batch; ++k) {
        const std::size_t i = next + k;
        futures[i] = std::async(std::launch::async,
                                [&cfg, i, &electronic_train] { return run_power_cell(cfg, i, electronic_train); });
      }
      for (std::size_t k = 0; k < batch; ++k) cells[next + k] = futures[next + k].get();
      next += batch;
    }
  }

  // ---- Analysis ----
  const std::map<std::string, SeriesStats> stats = [&] {
    std::map<std::string, SeriesStats> m;
    for (const char* key : {"raw_noisy", "raw_clean", "optimal_noisy", "optimal_clean", "wiener_noisy"}) {
      SeriesStats s = collect(cells, key);
      if (!s.powers.empty()) m[key] = std::move(s);
    }
    return m;
  }();

  ordered_json summary;
  summary["tool"] = "pulserec";
  summary["version"] = kVersion;
  summary["config_hash"] = hash;
  summary["seed"] = cfg.seed;
  summary["powers_w"] = powers;

  ordered_json series_json;
  for (const auto& [key, s] : stats) {
    series_json[key] = {{"powers_w", s.powers},
                        {"variance", s.variances},
                        {"se", s.se},
                        {"var_phi", s.var_phi}};
  }
  summary["series"] = series_json;

  ordered_json fits;
  for (const auto& [key, s] : stats) {
    ordered_json j = fit_json(s);
    if (!j.empty()) fits[key] = j;
  }
  summary["fits"] = fits;

  ordered_json analysis;
  analysis["shot_slope_analytic"] = cfg.noise.shot_scale;
  if (stats.count("raw_noisy") && fits.count("raw_noisy")) {
    const auto& q = fits["raw_noisy"]["quadratic"];
    const double b = q["b"], c = q["c"];
    const double pmax = powers.back();
    if (b > 0.0 && c > 0.0 && pmax > 0.0) {
      analysis["tech_to_shot_db"] = 10.0 * std::log10(c * pmax / b);
    }
    analysis["raw_b_over_analytic"] = b / cfg.noise.shot_scale;
    analysis["raw_c_significance"] = c / std::max(1e-300, q["sigma_c"].get<double>());
  }
  if (fits.count("optimal_noisy") && fits.count("optimal_clean")) {
    const double b_noisy = fits["optimal_noisy"]["quadratic"]["b"];
    const double b_clean = fits["optimal_clean"]["quadratic"]["b"];
    if (b_clean != 0.0) analysis["slope_ratio_optimal"] = b_noisy / b_clean;
    analysis["optimal_c_significance"] =
        fits["optimal_noisy"]["quadratic"]["c"].get<double>() /
        std::max(1e-300, fits["optimal_noisy"]["quadratic"]["sigma_c"].get<double>());
  }

  // Estimator ordering with separations in standard-error units.
  if (stats.count("raw_noisy") && stats.count("wiener_noisy") && stats.count("optimal_noisy")) {
    bool ordered = true;
    double min_sep = 1e300;
    const auto& raw = stats.at("raw_noisy");
    const auto& wie = stats.at("wiener_noisy");
    const auto& opt = stats.at("optimal_noisy");
    for (std::size_t i = 0; i < raw.powers.size(); ++i) {
      if (raw.powers[i] < kOrderingMinPower) continue;
      auto find_at = [&](const SeriesStats& s) -> std::pair<double, double> {
        for (std::size_t k = 0; k < s.powers.size(); ++k) {
          if (std::abs(s.powers[k] - raw.powers[i]) < 1e-12) return {s.variances[k], s.se[k]};
        }
        return {-1.0, 0.0};
      };
      const auto [vr, sr] = find_at(raw);
      const auto [vw, sw] = find_at(wie);
      const auto [vo, so] = find_at(opt);
      if (vw < 0.0 || vo < 0.0) continue;
      const double sep_ow = (vw - vo) / std::sqrt(so * so + sw * sw);
      const double sep_wr = (vr - vw) / std::sqrt(sw * sw + sr * sr);
      min_sep = std::min({min_sep, sep_ow, sep_wr});
      if (!(vo <= vw && vw <= vr)) ordered = false;
    }
    analysis["ordering_min_power_w"] = kOrderingMinPower;
    analysis["ordering_ok"] = ordered;
    if (min_sep < 1e300) analysis["ordering_min_separation_se"] = min_sep;
  }
  summary["analysis"] = analysis;

  // ---- Report bundle ----
  SweepResult result;
  std::filesystem::create_directories(cfg.output_dir);
  auto out_path = [&](const std::string& name) { return (std::filesystem::path(cfg.output_dir) / name).string(); };
  const std::string header = "# config_hash = " + hash + "\n# version = " + std::string(kVersion) + "\n";

  {  // fig5: characterization PSDs at the top power
    const PowerCell& top = cells.back();
    std::ostringstream os;
    os << header << "freq_hz,psd_with_tech,psd_no_tech,psd_electronic\n";
    if (!top.psd_with_tech.bins.empty()) {
      const double dnu = top.psd_with_tech.dnu();
      for (std::size_t k = 0; k < top.psd_with_tech.bins.size(); ++k) {
        os << format_double(dnu * static_cast<double>(k)) << "," << format_double(top.psd_with_tech.bins[k].real())
           << "," << format_double(top.psd_no_tech.bins[k].real()) << ","
           << format_double(top.psd_electronic.bins[k].real()) << "\n";
      }
    }
    write_text_file(out_path("fig5_psd.csv"), os.str(), result.files_written);
  }
  {  // fig6: raw-estimator variance vs power
    std::ostringstream os;
    os << header << "power_w,var_raw_clean,se_raw_clean,var_raw_noisy,se_raw_noisy\n";
    for (std::size_t i = 0; i < powers.size(); ++i) {
      os << format_double(powers[i]);
      for (const char* key : {"raw_clean", "raw_noisy"}) {
        const auto it = stats.find(key);
        if (it != stats.end() && i < it->second.powers.size()) {
          os << "," << format_double(it->second.variances[i]) << "," << format_double(it->second.se[i]);
        } else {
          os << ",,";
        }
      }
      os << "\n";
    }
    write_text_file(out_path("fig6_var.csv"), os.str(), result.files_written);
  }
  {  // fig8: optimal estimator on clean vs injected data
    std::ostringstream os;
    os << header << "power_w,var_optimal_clean,se_optimal_clean,var_optimal_noisy,se_optimal_noisy\n";
    const auto itc = stats.find("optimal_clean");
    const auto itn = stats.find("optimal_noisy");
    if (itc != stats.end() && itn != stats.end()) {
      for (std::size_t k = 0; k < itc->second.powers.size(); ++k) {
        os << format_double(itc->second.powers[k]) << "," << format_double(itc->second.variances[k]) << ","
           << format_double(itc->second.se[k]) << "," << format_double(itn->second.variances[k]) << ","
           << format_double(itn->second.se[k]) << "\n";
      }
    }
    write_text_file(out_path("fig8_compare.csv"), os.str(), result.files_written);
  }
  {  // fig9: angle-noise curves
    std::ostringstream os;
    os << header << "power_w,series,var_phi\n";
    for (const auto& [key, s] : stats) {
      for (std::size_t k = 0; k < s.powers.size(); ++k) {
        if (s.powers[k] <= 0.0) continue;
        os << format_double(s.powers[k]) << "," << key << "," << format_double(s.var_phi[k]) << "\n";
      }
    }
    write_text_file(out_path("fig9_angle.csv"), os.str(), result.files_written);
  }
  {  // tidy per-pulse estimates
    std::ostringstream os;
    os << header << "power_w,series,pulse,estimate\n";
    for (const auto& cell : cells) {
      for (const auto& [key, series] : cell.series) {
        for (std::size_t j = 0; j < series.values.size(); ++j) {
          os << format_double(cell.power) << "," << key << "," << j << "," << format_double(series.values[j])
             << "\n";
        }
      }
    }
    write_text_file(out_path("estimates.csv"), os.str(), result.files_written);
  }
  {  // solved filters at the top power
    const PowerCell& top = cells.back();
    if (top.pattern) {
      export_pattern_solution(out_path("pattern_top"), *top.pattern, hash);
      result.files_written.push_back(out_path("pattern_top_time.csv"));
      result.files_written.push_back(out_path("pattern_top_freq.csv"));
    }
    if (top.wiener) {
      export_wiener_filter(out_path("wiener_top"), *top.wiener, hash);
      result.files_written.push_back(out_path("wiener_top_time.csv"));
      result.files_written.push_back(out_path("wiener_top_freq.csv"));
    }
  }

  result.summary_json = summary.dump(2) + "\n";
  write_text_file(out_path("summary.json"), result.summary_json, result.files_written);
  return result;
}

}  // namespace pulserec
