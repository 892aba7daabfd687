#pragma once

// Plain-text `key = value` configuration files.
//
//   # comment
//   kind = machine
//   theta = 1, 4
//
// Keys are unique; lists are comma separated; blank lines and `#` comments
// are ignored. Whitespace around keys and values is trimmed.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ddc/core.hpp"

namespace ddc {

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}
}  // namespace detail

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>") {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
      std::string key = detail::trim(line.substr(0, eq));
      std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (!cfg.values_.emplace(key, value).second)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" + key + "`");
      cfg.order_.push_back(key);
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    if (!has(key)) order_.push_back(key);
    values_[key] = value;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key `" + key + "`");
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }

  double get_double(const std::string& key) const { return to_double(key, get(key)); }
  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long long get_int(const std::string& key) const { return to_int(key, get(key)); }
  long long get_int_or(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : detail::split(get(key), ',')) out.push_back(to_double(key, item));
    return out;
  }

  std::vector<long long> get_ints(const std::string& key) const {
    std::vector<long long> out;
    for (const auto& item : detail::split(get(key), ',')) out.push_back(to_int(key, item));
    return out;
  }

  std::vector<std::string> get_list(const std::string& key) const {
    return detail::split(get(key), ',');
  }

  /// Canonical serialization in insertion order; used for config hashing.
  std::string to_string() const {
    std::string out;
    for (const auto& key : order_) out += key + " = " + values_.at(key) + "\n";
    return out;
  }

  const std::vector<std::string>& keys() const { return order_; }

 private:
  static double to_double(const std::string& key, const std::string& text) {
    try {
      std::size_t used = 0;
      double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key `" + key + "`: not a number: `" + text + "`");
    }
  }
  static long long to_int(const std::string& key, const std::string& text) {
    try {
      std::size_t used = 0;
      long long v = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key `" + key + "`: not an integer: `" + text + "`");
    }
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

}  // namespace ddc
