#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sagn/common.hpp"

namespace sagn {

// Key-value run configuration: "key = value" lines with '#' comments, every
// key overridable from the command line. Lookups are tracked so unknown keys
// can be rejected after the consumers have run.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw usage_error("cannot open config file: " + path);
    Config cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw usage_error(path + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
      }
      cfg.kv_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  void apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw usage_error("--set expects key=value, got: " + kv);
    }
    kv_[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& dflt) const {
    accessed_.insert(key);
    const auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    accessed_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      return std::stod(it->second);
    } catch (...) {
      throw usage_error("config key " + key + ": not a number: " + it->second);
    }
  }

  long long get_int(const std::string& key, long long dflt) const {
    accessed_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      return std::stoll(it->second);
    } catch (...) {
      throw usage_error("config key " + key +
                        ": not an integer: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool dflt) const {
    accessed_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw usage_error("config key " + key + ": not a bool: " + it->second);
  }

  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& dflt) const {
    accessed_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    std::vector<int> out;
    std::istringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        out.push_back(std::stoi(trim(tok)));
      } catch (...) {
        throw usage_error("config key " + key +
                          ": not an integer list: " + it->second);
      }
    }
    if (out.empty()) {
      throw usage_error("config key " + key + ": empty list");
    }
    return out;
  }

  // Rejects keys nobody consumed (typo guard).
  void ensure_all_consumed() const {
    std::string unknown;
    for (const auto& [k, v] : kv_) {
      if (!accessed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    }
    if (!unknown.empty()) {
      throw usage_error("unknown config keys: " + unknown);
    }
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> accessed_;
};

}  // namespace sagn
