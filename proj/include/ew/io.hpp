#pragma once

// Dataset CSV input and the machine-readable outputs: CSV with a config
// echo in leading comment lines, JSON with 17-significant-digit floats.

#include "ew/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ew {

/// Malformed input; `line` is 1-based (0 when not tied to a line).
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, int line);
  int line() const { return line_; }

private:
  int line_;
};

/// Header `x1,...,xp,y`, then one numeric row per observation. Blank lines
/// and lines starting with '#' are skipped.
DesignSample read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path, const DesignSample& sample);

/// printf("%.17g"); non-finite values as "nan", "inf", "-inf".
std::string format_double(double x);

/// Serializes with every floating-point number printed by format_double
/// (non-finite numbers become null). Object keys keep nlohmann's sorted order.
std::string dump_json(const nlohmann::json& j, int indent = 2);

using ConfigEcho = std::map<std::string, std::string>;

nlohmann::json echo_to_json(const ConfigEcho& echo);

/// Writes `# key=value` lines, then the header, then rows.
void write_csv(const std::filesystem::path& path, const ConfigEcho& echo, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ew
