#include "pulserec/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pulserec {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config_text(os.str());
}

double get_double(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw Error("");
    return v;
  } catch (...) {
    throw Error("config key " + key + ": cannot parse '" + it->second + "' as a number");
  }
}

double require_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  if (!kv.count(key)) throw Error("config key " + key + " is required");
  return get_double(kv, key, 0.0);
}

std::uint64_t get_u64(const std::map<std::string, std::string>& kv, const std::string& key,
                      std::uint64_t fallback) {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw Error("");
    return static_cast<std::uint64_t>(v);
  } catch (...) {
    throw Error("config key " + key + ": cannot parse '" + it->second + "' as an integer");
  }
}

std::string get_string(const std::map<std::string, std::string>& kv, const std::string& key,
                       const std::string& fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string config_hash(const std::map<std::string, std::string>& kv) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [k, v] : kv) {  // std::map iterates in sorted key order
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void reject_unknown_keys(const std::map<std::string, std::string>& kv, const std::set<std::string>& known) {
  for (const auto& [k, _] : kv) {
    if (!known.count(k)) throw Error("unknown config key: " + k);
  }
}

}  // namespace pulserec
