#pragma once

// Flat key=value configuration files: one key per line, '#' starts a comment.

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wavecast/error.hpp"

namespace wavecast {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline bool parse_int(std::string_view s, long long& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace detail

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view view = line;
      if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
      view = detail::trim(view);
      if (view.empty()) continue;
      const auto eq = view.find('=');
      if (eq == std::string_view::npos) {
        throw Error(Errc::ConfigInvalid, "line " + std::to_string(lineno) + ": expected key = value");
      }
      auto key = detail::trim(view.substr(0, eq));
      if (key.empty()) {
        throw Error(Errc::ConfigInvalid, "line " + std::to_string(lineno) + ": empty key");
      }
      cfg.values_[std::string(key)] = std::string(detail::trim(view.substr(eq + 1)));
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open config file " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    if (!detail::parse_double(it->second, v)) {
      throw Error(Errc::ConfigInvalid, key + ": not a number: '" + it->second + "'");
    }
    return v;
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    if (!detail::parse_int(it->second, v)) {
      throw Error(Errc::ConfigInvalid, key + ": not an integer: '" + it->second + "'");
    }
    return v;
  }

  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (auto part : detail::split(it->second, ',')) {
      double v = 0.0;
      if (!detail::parse_double(part, v)) {
        throw Error(Errc::ConfigInvalid, key + ": bad list entry '" + std::string(part) + "'");
      }
      out.push_back(v);
    }
    return out;
  }

  std::vector<long long> get_ints(const std::string& key, std::vector<long long> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<long long> out;
    for (auto part : detail::split(it->second, ',')) {
      long long v = 0;
      if (!detail::parse_int(part, v)) {
        throw Error(Errc::ConfigInvalid, key + ": bad list entry '" + std::string(part) + "'");
      }
      out.push_back(v);
    }
    return out;
  }

  /// Comma-separated `a:b` pairs, e.g. `0:25, 120:5`.
  std::vector<std::pair<double, double>> get_pairs(const std::string& key,
                                                   std::vector<std::pair<double, double>> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::pair<double, double>> out;
    if (detail::trim(it->second).empty()) return out;
    for (auto part : detail::split(it->second, ',')) {
      const auto colon = part.find(':');
      double a = 0.0, b = 0.0;
      if (colon == std::string_view::npos || !detail::parse_double(part.substr(0, colon), a) ||
          !detail::parse_double(part.substr(colon + 1), b)) {
        throw Error(Errc::ConfigInvalid, key + ": expected a:b entries, got '" + std::string(part) + "'");
      }
      out.emplace_back(a, b);
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Canonical text form; sorted keys so identical configs serialize identically.
  std::string to_string() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace wavecast
