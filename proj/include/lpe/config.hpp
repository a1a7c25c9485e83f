#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace lpe {

/// One scalar or numeric-array config value.
using ConfigValue = std::variant<std::int64_t, double, bool, std::string,
                                 std::vector<double>>;

/// Flat key/value config: the [experiment] table of a TOML file plus any
/// command-line overrides. Reads are tracked so unknown keys can be rejected
/// after an experiment has consumed everything it understands.
class Config {
 public:
  void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }

  [[nodiscard]] std::int64_t get_int(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    touch(key);
    const ConfigValue& v = values_.at(key);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    throw std::invalid_argument("config key '" + key + "' must be an integer");
  }

  [[nodiscard]] double get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    touch(key);
    const ConfigValue& v = values_.at(key);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw std::invalid_argument("config key '" + key + "' must be a number");
  }

  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    touch(key);
    const ConfigValue& v = values_.at(key);
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw std::invalid_argument("config key '" + key + "' must be a boolean");
  }

  [[nodiscard]] std::string get_string(const std::string& key, std::string fallback) {
    if (!has(key)) return fallback;
    touch(key);
    const ConfigValue& v = values_.at(key);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw std::invalid_argument("config key '" + key + "' must be a string");
  }

  [[nodiscard]] std::vector<double> get_double_array(const std::string& key,
                                                     std::vector<double> fallback) {
    if (!has(key)) return fallback;
    touch(key);
    const ConfigValue& v = values_.at(key);
    if (const auto* a = std::get_if<std::vector<double>>(&v)) return *a;
    throw std::invalid_argument("config key '" + key + "' must be a numeric array");
  }

  /// Fail-fast on anything an experiment did not consume.
  void reject_unread() const {
    std::vector<std::string> unknown;
    for (const auto& [key, _] : values_)
      if (read_.count(key) == 0) unknown.push_back(key);
    if (!unknown.empty()) {
      std::string msg = "unknown config key(s):";
      for (const auto& k : unknown) msg += " '" + k + "'";
      throw std::invalid_argument(msg);
    }
  }

  [[nodiscard]] const std::map<std::string, ConfigValue>& values() const {
    return values_;
  }

 private:
  void touch(const std::string& key) { read_.insert(key); }

  std::map<std::string, ConfigValue> values_;
  mutable std::set<std::string> read_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline ConfigValue parse_scalar(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (v.empty())
    throw std::invalid_argument("config line " + std::to_string(line_no) +
                                ": empty value");
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  // Number: integer unless it carries a fraction or exponent.
  try {
    std::size_t used = 0;
    if (v.find_first_of(".eE") == std::string::npos ||
        (v.size() > 1 && (v.substr(0, 2) == "0x" || v.substr(0, 2) == "0X"))) {
      const std::int64_t i = std::stoll(v, &used);
      if (used == v.size()) return i;
    }
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
    // fall through to the error below
  }
  throw std::invalid_argument("config line " + std::to_string(line_no) +
                              ": cannot parse value '" + v + "'");
}

inline ConfigValue parse_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']')
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": unterminated array");
    std::vector<double> arr;
    std::string inner = v.substr(1, v.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) continue;
      const ConfigValue elem = parse_scalar(t, line_no);
      if (const auto* d = std::get_if<double>(&elem))
        arr.push_back(*d);
      else if (const auto* i = std::get_if<std::int64_t>(&elem))
        arr.push_back(static_cast<double>(*i));
      else
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": arrays must be numeric");
    }
    return arr;
  }
  return parse_scalar(v, line_no);
}

}  // namespace detail

/// Parses the supported TOML subset: a single [experiment] table of
/// `key = value` lines with strings, integers, floats, booleans and numeric
/// arrays. Comments start with '#'. Anything else is rejected.
inline Config parse_experiment_toml(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  bool in_experiment = false;
  bool saw_table = false;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line != "[experiment]")
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": only an [experiment] table is supported");
      if (saw_table)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": duplicate [experiment] table");
      in_experiment = true;
      saw_table = true;
      continue;
    }
    if (!in_experiment)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": keys must appear inside [experiment]");
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": empty key");
    cfg.set(key, detail::parse_value(line.substr(eq + 1), line_no));
  }
  return cfg;
}

/// Parses a command-line override value with the same rules as the file.
inline ConfigValue parse_override_value(const std::string& raw) {
  return detail::parse_value(raw, 0);
}

}  // namespace lpe
