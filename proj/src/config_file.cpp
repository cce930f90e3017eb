#include "flymethrough/config_file.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace flymethrough {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) throw Error(ErrorCode::InvalidArgument, "setting " + key + " must be a number, got '" + text + "'");
  return v;
}

std::size_t to_count(const std::string& key, const std::string& text) {
  const double v = to_number(key, text);
  if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw Error(ErrorCode::InvalidArgument, "setting " + key + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::optional<std::string> Settings::get(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) return std::nullopt;
  return it->second;
}

std::optional<double> Settings::number(const std::string& key) const {
  const auto v = get(key);
  if (!v) return std::nullopt;
  return to_number(key, *v);
}

Settings parse_settings(std::istream& in, const std::string& source) {
  Settings settings;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (text.front() == '[' && text.back() == ']') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (const auto hash = value.find('#'); hash != std::string::npos) {
      value = trim(value.substr(0, hash));
    }
    if (key.empty()) throw Error(ErrorCode::ParseError, source + ":" + std::to_string(number) + ": empty key");
    settings.values[key] = value;
  }
  return settings;
}

Settings load_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  return parse_settings(in, path.string());
}

void apply_settings(const Settings& settings, Project& project) {
  static const std::set<std::string> kServiceKeys = {"provider", "workers"};
  CastConfig cast = project.cast_config;
  ClusterConfig cluster = project.cluster_config;
  for (const auto& [key, value] : settings.values) {
    if (key == "growth_factor") {
      cast.growth_factor = to_number(key, value);
    } else if (key == "contact_threshold") {
      cast.contact_threshold = to_number(key, value);
    } else if (key == "contact_tolerance") {
      cast.contact_tolerance = to_number(key, value);
    } else if (key == "initial_scale") {
      cast.initial_scale = to_number(key, value);
    } else if (key == "max_scale") {
      cast.max_scale = to_number(key, value);
    } else if (key == "downsample_min") {
      cast.downsample_min = to_count(key, value);
    } else if (key == "downsample_max") {
      cast.downsample_max = to_count(key, value);
    } else if (key == "epsilon") {
      cluster.epsilon = to_number(key, value);
    } else if (key == "min_pts") {
      cluster.min_pts = to_count(key, value);
    } else if (key == "selection") {
      if (value == "largest") {
        cluster.selection = ClusterSelection::Largest;
      } else if (value == "all") {
        cluster.selection = ClusterSelection::All;
      } else {
        throw Error(ErrorCode::InvalidArgument, "selection must be largest or all");
      }
    } else if (key == "tau") {
      project.segmenter_config.tau = to_number(key, value);
    } else if (!kServiceKeys.count(key)) {
      throw Error(ErrorCode::InvalidArgument, "unknown setting '" + key + "'");
    }
  }
  cast.validate();
  cluster.validate();
  project.cast_config = cast;
  project.cluster_config = cluster;
}

ServiceSettings service_settings(const Settings& settings) {
  ServiceSettings s;
  if (auto v = settings.get("provider")) s.provider = *v;
  if (auto v = settings.number("workers")) s.workers = static_cast<int>(*v);
  if (const char* env = std::getenv("FLYMETHROUGH_PROVIDER"); env && *env) s.provider = env;
  if (const char* env = std::getenv("FLYMETHROUGH_WORKERS"); env && *env) {
    s.workers = static_cast<int>(to_number("FLYMETHROUGH_WORKERS", env));
  }
  if (s.workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be at least 1");
  return s;
}

}  // namespace flymethrough
