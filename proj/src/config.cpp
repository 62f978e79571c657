#include "pm/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pm/error.hpp"

namespace pm {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

void apply(Settings& s, const std::string& key, const std::string& value) {
  if (key == "PM_EMBEDDER_URL") {
    s.embedder_url = value.empty() ? std::nullopt : std::optional(value);
  } else if (key == "PM_GENERATOR_URL") {
    s.generator_url = value.empty() ? std::nullopt : std::optional(value);
  } else if (key == "PM_SEED") {
    try {
      std::size_t used = 0;
      s.seed = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidInput, "PM_SEED must be an unsigned integer, got '" + value + "'");
    }
  }
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    auto j = text.find('\n', i);
    if (j == std::string_view::npos) j = text.size();
    ++line_no;
    const auto line = trim(text.substr(i, j - i));
    i = j + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidInput, "config line " + std::to_string(line_no) + ": expected KEY=VALUE");
    }
    out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

std::optional<std::string> process_env(const char* name) {
  if (const char* v = std::getenv(name)) return std::string(v);
  return std::nullopt;
}

Settings load_settings(const std::optional<std::filesystem::path>& config_file, const EnvLookup& env) {
  Settings s;
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw Error(ErrorCode::IoError, config_file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& [k, v] : parse_key_values(buf.str())) apply(s, k, v);
  }
  for (const char* key : {"PM_EMBEDDER_URL", "PM_GENERATOR_URL", "PM_SEED"}) {
    if (auto v = env(key)) apply(s, key, *v);
  }
  return s;
}

}  // namespace pm
