#pragma once

#include <map>
#include <string>

#include "pulserec/pattern.hpp"
#include "pulserec/signal.hpp"
#include "pulserec/wiener.hpp"

namespace pulserec {

/// Waveform trace file: `# key = value` header lines (dt, unit, t0, seed,
/// spec_hash, n_samples) followed by one sample per line.
struct TraceMetadata {
  std::uint64_t seed = 0;
  std::string spec_hash;
  std::string version;
};

void write_trace(const std::string& path, const SampledWaveform& w, const TraceMetadata& meta);

struct LoadedTrace {
  SampledWaveform waveform;
  TraceMetadata meta;
};

/// Strict reader: malformed rows are rejected with their line number,
/// truncated files with the byte offset where data ran out.
LoadedTrace read_trace(const std::string& path);

/// Pattern and Wiener exports share one schema: a `# key = value` metadata
/// block followed by CSV rows. `<base>_time.csv` holds (t, g);
/// `<base>_freq.csv` holds (f, re, im).
void export_filter(const std::string& base_path, const Spectrum& spectrum, const SampledWaveform& time,
                   const std::map<std::string, std::string>& metadata);
void export_pattern_solution(const std::string& base_path, const PatternSolution& sol,
                             const std::string& config_hash);
void export_wiener_filter(const std::string& base_path, const WienerFilter& f,
                          const std::string& config_hash);

}  // namespace pulserec
