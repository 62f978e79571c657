#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace pm {

/// Runtime settings. Keys mirror the environment variables
/// PM_EMBEDDER_URL, PM_GENERATOR_URL and PM_SEED.
struct Settings {
  std::optional<std::string> embedder_url;   // absent selects the mock embedder
  std::optional<std::string> generator_url;  // absent selects the mock generator
  std::uint64_t seed = 0;

  bool uses_http_backends() const noexcept { return embedder_url || generator_url; }
};

/// `KEY=VALUE` lines; blank lines and lines starting with '#' are ignored.
std::map<std::string, std::string> parse_key_values(std::string_view text);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;
std::optional<std::string> process_env(const char* name);

/// Config file first, environment on top.
Settings load_settings(const std::optional<std::filesystem::path>& config_file, const EnvLookup& env = process_env);

}  // namespace pm
