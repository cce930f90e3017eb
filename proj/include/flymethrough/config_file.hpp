#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "flymethrough/project.hpp"

namespace flymethrough {

inline constexpr const char* kConfigName = "flymethrough.toml";

/// Flat key = value settings. Section headers are accepted and ignored, so
/// keys must be unique across sections. Values may be quoted strings,
/// numbers or booleans. Lines starting with '#' are comments.
struct Settings {
  std::map<std::string, std::string> values;

  std::optional<std::string> get(const std::string& key) const;
  std::optional<double> number(const std::string& key) const;
};

Settings parse_settings(std::istream& in, const std::string& source = kConfigName);
/// Empty settings when the file does not exist.
Settings load_settings(const std::filesystem::path& path);

/// Applies cast, cluster and segmenter keys (names as in the manifest).
/// Throws InvalidArgument on unknown keys or bad values.
void apply_settings(const Settings& settings, Project& project);

/// Service settings: provider (URL or "fallback") and workers.
struct ServiceSettings {
  std::string provider = "fallback";
  int workers = 2;
};

/// Reads the settings file, then lets FLYMETHROUGH_PROVIDER and
/// FLYMETHROUGH_WORKERS override it.
ServiceSettings service_settings(const Settings& settings);

}  // namespace flymethrough
