#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ihpe/cascade.hpp"
#include "ihpe/data_io.hpp"
#include "ihpe/finger_detect.hpp"
#include "ihpe/voting.hpp"

namespace ihpe {

/// Flat `section.key -> value` view of an INI file.
class Config {
 public:
  /// Throws IoError or ConfigError (with the line number) on a bad file.
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  /// Applies "section.key=value". Throws ConfigError on a malformed override.
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Every module configuration, resolved from one Config.
struct Settings {
  CameraIntrinsics camera;
  float background = kDefaultBackground;
  MsraOptions msra;
  IcvlOptions icvl;
  double icvl_segment_band_mm = 0.0;
  CascadeConfig cascade;
  VotingConfig voting;
  DetectConfig detect;
  SynthDatasetConfig synth;
};

/// Unknown keys are rejected so that typos surface. Camera focal length feeds
/// both feature configs.
Settings resolve_settings(const Config& config);

/// Keys understood by resolve_settings, outside the free-form [gestures] section.
std::vector<std::string> known_config_keys();

}  // namespace ihpe
