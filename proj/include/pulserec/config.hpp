#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "pulserec/errors.hpp"

namespace pulserec {

/// Flat `key = value` configuration text: one pair per line, `#` comments,
/// blank lines ignored. Keys are dotted (detector.tau_tia, train.n_pulses).
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);

double get_double(const std::map<std::string, std::string>& kv, const std::string& key, double fallback);
double require_double(const std::map<std::string, std::string>& kv, const std::string& key);
std::uint64_t get_u64(const std::map<std::string, std::string>& kv, const std::string& key, std::uint64_t fallback);
std::string get_string(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::string& fallback);

/// Shortest-round-trip-ish decimal rendering used by all serializers so the
/// same values always hash the same way.
std::string format_double(double v);

/// FNV-1a 64-bit over the canonical (sorted key) rendering of the pairs.
std::string config_hash(const std::map<std::string, std::string>& kv);

/// Throws if kv contains keys outside `known` (typo guard).
void reject_unknown_keys(const std::map<std::string, std::string>& kv, const std::set<std::string>& known);

}  // namespace pulserec
