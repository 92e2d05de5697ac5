#pragma once

// Command-line front end. Every command reads a flat key=value config file
// (optional) merged with --key=value / --key value flags; flags win.
//
// Exit codes: 0 success, 1 bound validation failed or I/O error,
// 2 config/parse error, 3 enumeration budget exceeded, 4 numerical failure.

#include "ew/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ew::cli {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Merged key/value settings plus the echo of every value actually used.
class RunConfig {
public:
  /// Parses `key = value` lines; '#' starts a comment. Throws ParseError with the line number.
  static RunConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Throws ConfigError naming the first key not in `allowed`.
  void restrict_to(const std::set<std::string>& allowed) const;

  std::string text(const std::string& key, const std::string& fallback);
  std::string require_text(const std::string& key);
  double real(const std::string& key, double fallback);
  double require_real(const std::string& key);
  std::optional<double> maybe_real(const std::string& key);
  long long integer(const std::string& key, long long fallback);
  bool flag(const std::string& key, bool fallback);
  std::vector<double> reals(const std::string& key);

  /// Records a derived value in the echo.
  void note(const std::string& key, const std::string& value) { echo_[key] = value; }
  const ConfigEcho& echo() const { return echo_; }

private:
  std::map<std::string, std::string> values_;
  ConfigEcho echo_;
};

int cmd_fit_exact(RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_fit_gibbs(RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_simulate(RunConfig& cfg, std::ostream& out, std::ostream& err, bool validate);
int cmd_tune(RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Full entry point: parses argv, dispatches, maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ew::cli
