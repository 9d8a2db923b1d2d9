#include "pulserec/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pulserec/config.hpp"
#include "pulserec/version.hpp"

namespace pulserec {

void write_trace(const std::string& path, const SampledWaveform& w, const TraceMetadata& meta) {
  std::ofstream f(path);
  if (!f) throw Error("write_trace: cannot open " + path);
  f << "# pulserec trace v1\n";
  f << "# dt = " << format_double(w.dt) << "\n";
  f << "# unit = " << to_string(w.unit) << "\n";
  f << "# t0 = " << format_double(w.t0) << "\n";
  f << "# seed = " << meta.seed << "\n";
  f << "# spec_hash = " << (meta.spec_hash.empty() ? "none" : meta.spec_hash) << "\n";
  f << "# version = " << kVersion << "\n";
  f << "# n_samples = " << w.samples.size() << "\n";
  for (double s : w.samples) f << format_double(s) << "\n";
  if (!f) throw Error("write_trace: write failed for " + path);
}

LoadedTrace read_trace(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("read_trace: cannot open " + path);

  LoadedTrace out;
  std::size_t n_expected = 0;
  bool have_n = false;
  std::string line;
  std::size_t lineno = 0;
  std::size_t byte_offset = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(f, line)) return false;
    ++lineno;
    byte_offset += line.size() + 1;  // assumes \n endings, which we write
    return true;
  };

  // Header block.
  while (next_line()) {
    if (line.empty()) continue;
    if (line[0] != '#') break;  // first sample row
    const auto kv_text = line.substr(1);
    const auto eq = kv_text.find('=');
    if (eq == std::string::npos) continue;  // banner line
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(kv_text.substr(0, eq));
    const std::string value = trim(kv_text.substr(eq + 1));
    if (key == "dt") {
      out.waveform.dt = std::stod(value);
    } else if (key == "t0") {
      out.waveform.t0 = std::stod(value);
    } else if (key == "unit") {
      out.waveform.unit = unit_from_string(value);
    } else if (key == "seed") {
      out.meta.seed = std::stoull(value);
    } else if (key == "spec_hash") {
      out.meta.spec_hash = value;
    } else if (key == "version") {
      out.meta.version = value;
    } else if (key == "n_samples") {
      n_expected = std::stoull(value);
      have_n = true;
    } else {
      throw Error("read_trace: unknown header key '" + key + "' at line " + std::to_string(lineno));
    }
  }
  if (!have_n) throw Error("read_trace: header missing n_samples");
  if (!(out.waveform.dt > 0.0)) throw Error("read_trace: header missing or invalid dt");

  out.waveform.samples.reserve(n_expected);
  // `line` currently holds the first sample row (if any).
  bool have_row = !f.fail() && !line.empty() && line[0] != '#';
  while (out.waveform.samples.size() < n_expected) {
    if (!have_row) {
      if (!next_line()) {
        throw Error("read_trace: truncated file at byte " + std::to_string(byte_offset) + " after " +
                    std::to_string(out.waveform.samples.size()) + " of " + std::to_string(n_expected) +
                    " samples");
      }
      if (line.empty()) continue;
    }
    have_row = false;
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str() || *end != '\0') {
      throw Error("read_trace: malformed row at line " + std::to_string(lineno) + ": '" + line + "'");
    }
    if (!std::isfinite(v)) {
      throw Error("read_trace: non-finite sample at line " + std::to_string(lineno));
    }
    out.waveform.samples.push_back(v);
  }
  return out;
}

namespace {

void write_metadata_block(std::ofstream& f, const std::map<std::string, std::string>& metadata) {
  for (const auto& [k, v] : metadata) f << "# " << k << " = " << v << "\n";
}

}  // namespace

void export_filter(const std::string& base_path, const Spectrum& spectrum, const SampledWaveform& time,
                   const std::map<std::string, std::string>& metadata) {
  {
    std::ofstream f(base_path + "_time.csv");
    if (!f) throw Error("export_filter: cannot open " + base_path + "_time.csv");
    write_metadata_block(f, metadata);
    f << "t,g\n";
    for (std::size_t i = 0; i < time.samples.size(); ++i) {
      f << format_double(time.time_at(i)) << "," << format_double(time.samples[i]) << "\n";
    }
  }
  {
    std::ofstream f(base_path + "_freq.csv");
    if (!f) throw Error("export_filter: cannot open " + base_path + "_freq.csv");
    write_metadata_block(f, metadata);
    f << "f,re,im\n";
    const double two_pi = 6.283185307179586;
    for (std::size_t k = 0; k < spectrum.bins.size(); ++k) {
      f << format_double(spectrum.omega_at(k) / two_pi) << "," << format_double(spectrum.bins[k].real())
        << "," << format_double(spectrum.bins[k].imag()) << "\n";
    }
  }
}

void export_pattern_solution(const std::string& base_path, const PatternSolution& sol,
                             const std::string& config_hash) {
  std::map<std::string, std::string> meta;
  meta["kind"] = "optimal_pattern";
  meta["lambda_orth"] = format_double(sol.lambda_orth);
  meta["lambda_cal"] = format_double(sol.lambda_cal);
  meta["noise_power"] = format_double(sol.noise_power);
  meta["orth_residual"] = format_double(sol.orth_residual);
  meta["cal_residual"] = format_double(sol.cal_residual);
  meta["config_hash"] = config_hash;
  meta["version"] = kVersion;
  export_filter(base_path, sol.filter_spectrum, sol.filter_time, meta);
}

void export_wiener_filter(const std::string& base_path, const WienerFilter& f,
                          const std::string& config_hash) {
  std::map<std::string, std::string> meta;
  meta["kind"] = "wiener";
  meta["regularized_bins"] = std::to_string(f.regularized_bins);
  meta["config_hash"] = config_hash;
  meta["version"] = kVersion;
  export_filter(base_path, f.response, f.weights_time, meta);
}

}  // namespace pulserec
