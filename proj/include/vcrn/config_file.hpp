#pragma once

#include <charconv>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "vcrn/error.hpp"

namespace vcrn::config {

/// Flat `key = value` text grouped under `[section]` headers. Lines starting
/// with '#' are comments. Keys before the first header belong to section "".
class ConfigFile {
 public:
  using Section = std::map<std::string, std::string>;

  static ConfigFile parse(std::string_view text, const std::string& what = "config") {
    ConfigFile cfg;
    std::string section;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      std::string_view s = trim(line);
      if (s.empty() || s.front() == '#') continue;
      auto where = [&] { return what + ":" + std::to_string(line_no); };
      if (s.front() == '[') {
        if (s.back() != ']' || s.size() < 3) {
          throw ParseError(ParseError::Reason::kMalformed, where() + ": bad section header");
        }
        section = std::string(trim(s.substr(1, s.size() - 2)));
        cfg.sections_[section];
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError(ParseError::Reason::kMalformed,
                         where() + ": expected key = value, got \"" + std::string(s) + "\"");
      }
      std::string key(trim(s.substr(0, eq)));
      std::string value(trim(s.substr(eq + 1)));
      if (key.empty()) throw ParseError(ParseError::Reason::kMalformed, where() + ": empty key");
      if (!cfg.sections_[section].emplace(key, value).second) {
        throw ConfigError(where() + ": duplicate key " + qualified(section, key));
      }
    }
    return cfg;
  }

  /// Canonical text: sections and keys in lexicographic order.
  std::string to_string() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [name, entries] : sections_) {
      if (!name.empty()) {
        if (!first) out << '\n';
        out << '[' << name << "]\n";
      }
      for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
      first = false;
    }
    return out.str();
  }

  bool has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key);
  }
  bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

  const std::string& raw(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end() || !it->second.count(key)) {
      throw ConfigError("missing config key " + qualified(section, key));
    }
    return it->second.at(key);
  }

  template <class T>
  T get(const std::string& section, const std::string& key) const {
    return convert<T>(raw(section, key), qualified(section, key));
  }
  template <class T>
  T get(const std::string& section, const std::string& key, T fallback) const {
    return has(section, key) ? get<T>(section, key) : fallback;
  }

  template <class T>
  void set(const std::string& section, const std::string& key, const T& value) {
    sections_[section][key] = format(value);
  }

  /// Rejects keys outside `known` so typos fail loudly.
  void require_known(const std::string& section, const std::set<std::string>& known) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return;
    for (const auto& [k, _] : it->second) {
      if (!known.count(k)) throw ConfigError("unknown config key " + qualified(section, k));
    }
  }

  const std::map<std::string, Section>& sections() const { return sections_; }
  bool operator==(const ConfigFile&) const = default;

  static std::string format(const std::string& v) { return v; }
  static std::string format(const char* v) { return v; }
  static std::string format(bool v) { return v ? "true" : "false"; }
  template <class T>
  static std::string format(const T& v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, r.ptr);
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }
  static std::string qualified(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  template <class T>
  static T convert(const std::string& s, const std::string& name) {
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "1") return true;
      if (s == "false" || s == "0") return false;
      throw ConfigError(name + ": expected true or false, got \"" + s + "\"");
    } else {
      T v{};
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ConfigError(name + ": cannot read \"" + s + "\" as a number");
      }
      return v;
    }
  }

  std::map<std::string, Section> sections_;
};

}  // namespace vcrn::config
