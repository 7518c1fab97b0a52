#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "maskinject/error.hpp"

namespace maskinject {

/// Flat `key = value` file. Blank lines and lines starting with '#' are
/// ignored; keys may not repeat.
using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace detail

inline ConfigMap parse_config(std::istream& in, const std::string& origin = "<config>") {
  ConfigMap out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw Error(where + ": expected key=value");
    const auto key = detail::trim(t.substr(0, eq));
    const auto value = detail::trim(t.substr(eq + 1));
    if (key.empty()) throw Error(where + ": empty key");
    if (!out.emplace(key, value).second) throw Error(where + ": duplicate key '" + key + "'");
  }
  return out;
}

inline ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  return parse_config(in, path);
}

/// Seed from MASKINJECT_SEED, if set.
inline std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("MASKINJECT_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const auto s = std::strtoull(v, &end, 10);
  if (*end != '\0' || v[0] == '-') throw Error(std::string("MASKINJECT_SEED is not an unsigned integer: '") + v + "'");
  return s;
}

}  // namespace maskinject
