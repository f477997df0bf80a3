#pragma once

// Flat key=value run configuration files.
//
//   # comment
//   variant = ft-spgd
//   lambda-h = 3
//
// Keys are the long option names of a subcommand without the leading dashes.
// Values may be wrapped in single or double quotes.

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace freqtune {

// Bad command line or configuration file. Not derived from Error: the CLI
// reports it with exit code 2 instead of 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace detail

/// Parses a config stream. Duplicate keys are rejected; `source` names the
/// file in diagnostics.
inline std::vector<ConfigEntry> parse_run_config(std::istream& is,
                                                 const std::string& source) {
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos)
      throw UsageError(where + ": expected key=value");
    ConfigEntry e{detail::trim(line.substr(0, eq)),
                  detail::trim(line.substr(eq + 1)), lineno};
    if (e.key.empty()) throw UsageError(where + ": empty key");
    if (e.value.size() >= 2 && (e.value.front() == '"' || e.value.front() == '\'') &&
        e.value.back() == e.value.front())
      e.value = e.value.substr(1, e.value.size() - 2);
    if (!seen.insert(e.key).second)
      throw UsageError(where + ": duplicate key '" + e.key + "'");
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ConfigEntry> read_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError(path + ": cannot open config file");
  return parse_run_config(is, path);
}

/// Writes entries in the given order, one `key=value` per line.
inline void write_run_config(
    std::ostream& os, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

}  // namespace freqtune
